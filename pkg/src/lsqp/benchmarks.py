"""The four benchmark problems, written in unit-RHS standard form."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gp import Monomial, Posynomial, Signomial, var
from .problem import (
    DEFAULT_FLOOR,
    KnownOptimum,
    MissingConstants,
    Problem,
    RawConstraint,
    ScalarFunction,
    normalize_constraint,
)
from .sqp import SolverOptions

NAMES = ("boyd", "rosenbrock", "floudas", "kirschen_ozturk")
OBJ_TOL = 1e-3
VAR_TOL = 5e-2


@dataclass(frozen=True)
class BenchmarkCase:
    name: str
    problem: Problem
    known_optimum: KnownOptimum
    default_options: dict = field(default_factory=dict)  # algorithm -> overrides
    success_tolerances: tuple = (OBJ_TOL, VAR_TOL)
    constants: dict = field(default_factory=dict)
    positive_starts: bool = False  # resample initial guesses where some f, g, h <= 0

    def options_for(self, algorithm, base: SolverOptions | None = None) -> SolverOptions:
        base = base or SolverOptions()
        return base.merged(**self.default_options.get(algorithm, {}))

    def relative_errors(self, x, f):
        ko = self.known_optimum
        rel_f = (f - ko.objective_value) / abs(ko.objective_value)
        rel_x = (np.asarray(x) - ko.x_star) / np.abs(ko.x_star)
        return float(rel_f), rel_x

    def is_success(self, x, f):
        rel_f, rel_x = self.relative_errors(x, f)
        obj_tol, var_tol = self.success_tolerances
        return bool(abs(rel_f) <= obj_tol and np.max(np.abs(rel_x)) <= var_tol)


def _floors(n, overrides=None, names=()):
    lb = np.full(n, DEFAULT_FLOOR)
    for key, val in (overrides or {}).items():
        lb[names.index(key) if isinstance(key, str) else int(key)] = float(val)
    return lb


# --- Boyd box ---------------------------------------------------------------

BOYD_CONSTANTS = {"A_wall": 100.0, "A_floor": 1000.0, "alpha": 0.5, "beta": 2.0,
                  "gamma": 0.5, "delta": 2.0}


def boyd_problem(constants=None, lower_bounds=None) -> BenchmarkCase:
    """Maximize box volume hwd (minimize 1/(hwd)) under wall, floor and aspect limits."""
    k = {**BOYD_CONSTANTS, **(constants or {})}
    n = 3
    h, w, d = var(0, n), var(1, n), var(2, n)
    obj = Monomial(1.0, [-1, -1, -1])
    cons = [
        (h * w) * (2 / k["A_wall"]) + (h * d) * (2 / k["A_wall"]),
        (w * d) / k["A_floor"],
        (w * k["alpha"]) / h,
        h / (w * k["beta"]),
        (w * k["gamma"]) / d,
        d / (w * k["delta"]),
    ]
    names = ("h", "w", "d")
    problem = Problem(
        n_vars=n,
        objective=obj.function("1/(hwd)"),
        ineq_constraints=[c.function(f"g{i + 1}") for i, c in enumerate(cons)],
        lower_bounds=_floors(n, lower_bounds, names),
        variable_names=names,
        metadata={"benchmark": "boyd"},
    )
    # with the aspect limits active: h = alpha w, d = delta w, wall area binding
    a, dl = k["alpha"], k["delta"]
    w_star = np.sqrt(k["A_wall"] / (2 * a + 2 * a * dl))
    x_star = np.array([a * w_star, w_star, dl * w_star])
    published = {"objective": 5.196e-03, "h": 2.89, "w": 5.77, "d": 11.55}
    ko = KnownOptimum(float(1.0 / np.prod(x_star)), x_star, published)
    return BenchmarkCase("boyd", problem, ko, constants=k)


# --- constrained Rosenbrock ---------------------------------------------------

def _rosen_obj(x):
    a, b = x
    r = b - a * a
    val = (1 - a) ** 2 + 100 * r * r + 1
    return val, np.array([-2 * (1 - a) - 400 * a * r, 200 * r])


def _rosen_cubic(x):
    a, b = x
    return (a - 1) ** 3 - b + 2, np.array([3 * (a - 1) ** 2, -1.0])


def _rosen_line(x):
    a, b = x
    return a + b - 1, np.array([1.0, 1.0])


ROSENBROCK_TRUST = (0.2, 0.5, 1.0)


def rosenbrock_problem(constants=None, lower_bounds=None) -> BenchmarkCase:
    """Rosenbrock valley shifted up by 1, with a cubic and a linear cut."""
    n = 2
    names = ("x", "y")
    problem = Problem(
        n_vars=n,
        objective=ScalarFunction(_rosen_obj, "signomial", "rosenbrock+1"),
        ineq_constraints=[
            ScalarFunction(_rosen_cubic, "signomial", "(x-1)^3-y+2"),
            ScalarFunction(_rosen_line, "signomial", "x+y-1"),
            Monomial(1 / 1.5, [1, 0]).function("x/1.5"),
            Monomial(1 / 2.5, [0, 1]).function("y/2.5"),
        ],
        lower_bounds=_floors(n, lower_bounds, names),
        variable_names=names,
        metadata={"benchmark": "rosenbrock", "local_optimum": [0.0, 0.0]},
    )
    ko = KnownOptimum(1.0, np.array([1.0, 1.0]), {"objective": 1.00, "x": 1.00, "y": 1.00})
    trust = {"trust_fractions": ROSENBROCK_TRUST}
    return BenchmarkCase("rosenbrock", problem, ko, {"sqp": trust, "lsqp": trust})


# --- Floudas heat exchanger ---------------------------------------------------

FLOUDAS_X_STAR = np.array([579.306685, 1359.97068, 5109.97068, 182.017700,
                           295.601173, 217.982300, 286.416526, 395.601173])


def floudas_problem(constants=None, lower_bounds=None) -> BenchmarkCase:
    """Heat-exchanger design: minimize x1 + x2 + x3 under six signomial limits."""
    n = 8
    x = [var(i, n) for i in range(n)]
    obj = x[0] + x[1] + x[2]
    g1 = Signomial(Posynomial([(x[3] / (x[0] * x[5])) * 833.33252, Monomial(100.0, -x[5].exponents)]),
                   Posynomial([Monomial(83333.333, -(x[0].exponents + x[5].exponents))]))
    g2 = Signomial(Posynomial([(x[4] / (x[1] * x[6])) * 1250.0, x[3] / x[6]]),
                   Posynomial([(x[3] / (x[1] * x[6])) * 1250.0]))
    g3 = Signomial(Posynomial([Monomial(1250000.0, -(x[2].exponents + x[7].exponents)), x[4] / x[7]]),
                   Posynomial([(x[4] / (x[2] * x[7])) * 2500.0]))
    g4 = x[3] * 0.0025 + x[5] * 0.0025
    g5 = Signomial(x[4] * 0.0025 + x[6] * 0.0025, Posynomial([x[3] * 0.0025]))
    g6 = Signomial(Posynomial([x[7] * 0.01]), Posynomial([x[4] * 0.01]))
    names = tuple(f"x{i + 1}" for i in range(n))
    problem = Problem(
        n_vars=n,
        objective=obj.function("x1+x2+x3"),
        ineq_constraints=[g.function(f"g{i + 1}") for i, g in enumerate((g1, g2, g3, g4, g5, g6))],
        lower_bounds=_floors(n, lower_bounds, names),
        variable_names=names,
        metadata={"benchmark": "floudas"},
    )
    published = {"objective": 7049.2, **dict(zip(names, (579.3, 1360.0, 5110.0, 182.0,
                                                            295.6, 218.0, 286.4, 395.6)))}
    ko = KnownOptimum(float(FLOUDAS_X_STAR[:3].sum()), FLOUDAS_X_STAR.copy(), published)
    # about 40% of +/-80% samples start with some g_i <= 0
    return BenchmarkCase("floudas", problem, ko, positive_starts=True)


# --- Kirschen-Ozturk aircraft sizing -----------------------------------------

KO_CONSTANTS = {
    "W_0": 4940.0,        # N
    "rho": 1.23,          # kg/m^3
    "mu": 1.78e-5,        # kg/(m s)
    "N_ult": 2.5,
    "tau": 0.12,
    "C_Ww1": 45.24,       # Pa
    "C_Ww2": 8.71e-5,     # 1/m
    "V_min": 22.0,        # m/s
    "C_Lmax": 1.5,
    "R": 1.0e6,           # m
    "c_T": 0.4 / 3600.0,  # 1/s
    "k": 1.2,
    "S_wet_ratio": 2.05,
    "e": 0.95,
    "CDA0": 0.030,        # m^2
    "rho_f": 804.0,       # kg/m^3
    "g": 9.81,            # m/s^2
}

KO_VARIABLES = ("W_f", "A", "S", "V", "C_L", "C_D", "C_f", "Re", "D", "W", "W_w",
                "W_w_surf", "W_w_strc", "V_f", "V_f_avail", "V_f_fuse", "V_f_wing", "t")

# SP+DCA column (t converted from minutes to seconds)
KO_PUBLISHED = {
    "objective": 755.91, "W_f": 755.9, "A": 6.52, "C_D": 0.013, "C_L": 0.234, "C_f": 3.278e-03,
    "D": 368.7, "Re": 5.86e+06, "S": 16.00, "V": 54.18, "V_f": 0.096, "V_f_avail": 9.584e-02,
    "V_f_fuse": 5.840e-03, "V_f_wing": 9.016e-02, "W": 7140.2, "W_w": 1444.3,
    "W_w_strc": 720.8, "W_w_surf": 723.5, "t": 307.6 * 60.0,
}


def _wing_structure(k, idx):
    """C_Ww2 N_ult A^1.5 sqrt((W_0 + V_f_fuse g rho_f) W S) / (W_w_strc tau)."""
    K = k["C_Ww2"] * k["N_ult"] / k["tau"]
    fuel = k["g"] * k["rho_f"]
    iA, iW, iS, iWs, iVff = idx["A"], idx["W"], idx["S"], idx["W_w_strc"], idx["V_f_fuse"]

    def fn(x):
        P = k["W_0"] + x[iVff] * fuel
        v = K * x[iA] ** 1.5 * np.sqrt(P * x[iW] * x[iS]) / x[iWs]
        grad = np.zeros_like(x)
        grad[iA] = 1.5 * v / x[iA]
        grad[iW] = 0.5 * v / x[iW]
        grad[iS] = 0.5 * v / x[iS]
        grad[iWs] = -v / x[iWs]
        grad[iVff] = 0.5 * v * fuel / P
        return v, grad

    return ScalarFunction(fn, "opaque", "wing structural weight")


def kirschen_ozturk_problem(constants=None, lower_bounds=None, x_star=None) -> BenchmarkCase:
    """Low-fidelity aircraft sizing: minimize fuel weight over 18 design variables."""
    k = dict(KO_CONSTANTS)
    if constants is not None:
        k.update(constants)
    missing = [key for key in KO_CONSTANTS if key not in k or k[key] is None]
    if missing:
        raise MissingConstants(f"missing Kirschen-Ozturk constants: {missing}")
    n = len(KO_VARIABLES)
    idx = {name: i for i, name in enumerate(KO_VARIABLES)}
    v = {name: var(i, n) for name, i in idx.items()}
    q = v["V"] ** 2 * v["S"] * (0.5 * k["rho"])  # dynamic pressure times area

    lift = q * v["C_L"]
    cons = [
        (v["t"] * v["D"] * k["c_T"] / v["W_f"]).function("fuel burn"),
        (Monomial(k["R"], np.zeros(n)) / (v["V"] * v["t"])).function("range"),
        (q * v["C_D"] / v["D"]).function("drag"),
        (Posynomial([Monomial(k["CDA0"], np.zeros(n)) / (v["S"] * v["C_D"]),
                     v["C_f"] / v["C_D"] * (k["k"] * k["S_wet_ratio"]),
                     v["C_L"] ** 2 / (v["A"] * v["C_D"]) / (np.pi * k["e"])])).function("drag build-up"),
        (Monomial(0.074, np.zeros(n)) * v["Re"] ** -0.2 / v["C_f"]).function("skin friction"),
        (v["Re"] * k["mu"] / (v["V"] * v["S"] ** 0.5 / v["A"] ** 0.5 * k["rho"])).function("Reynolds"),
        (Posynomial([Monomial(k["W_0"], np.zeros(n)), v["W_w"], v["W_f"] * 0.5]) / lift).function("cruise lift"),
        (v["W"] / (v["S"] * (0.5 * k["rho"] * k["V_min"] ** 2 * k["C_Lmax"]))).function("landing"),
        (Posynomial([Monomial(k["W_0"], np.zeros(n)), v["W_w"], v["W_f"]]) / v["W"]).function("weight build-up"),
        (Posynomial([v["W_w_surf"], v["W_w_strc"]]) / v["W_w"]).function("wing weight"),
        (v["S"] * k["C_Ww1"] / v["W_w_surf"]).function("wing surface weight"),
        _wing_structure(k, idx),
        (v["V_f"] / v["V_f_avail"]).function("fuel volume"),
    ]
    # zero-RHS signomial, shifted by +1
    avail = Signomial(Posynomial([v["V_f_avail"]]), Posynomial([v["V_f_wing"], v["V_f_fuse"]]))
    shifted, rel = normalize_constraint(RawConstraint(avail.function("fuel volume available"), "<=", 0.0))
    assert rel == "<="
    cons += [
        shifted,
        (v["V_f_wing"] ** 2 * v["A"] / (v["S"] ** 3 * (0.0009 * k["tau"] ** 2))).function("wing tank"),
        (v["V_f_fuse"] / (k["CDA0"] * 10.0)).function("fuselage tank"),
    ]
    eq = [(v["V_f"] * (k["g"] * k["rho_f"]) / v["W_f"]).function("fuel mass")]
    problem = Problem(
        n_vars=n,
        objective=v["W_f"].function("W_f"),
        ineq_constraints=cons,
        eq_constraints=eq,
        lower_bounds=_floors(n, lower_bounds, KO_VARIABLES),
        variable_names=KO_VARIABLES,
        metadata={"benchmark": "kirschen_ozturk", "units": "SI (t in seconds)"},
    )
    xs = KO_X_STAR if x_star is None else np.asarray(x_star, dtype=float)
    ko = KnownOptimum(float(xs[0]), xs.copy(), dict(KO_PUBLISHED))
    return BenchmarkCase("kirschen_ozturk", problem, ko, constants=k)


# optimum of this formulation with the constants above (solved to eps 1e-12)
KO_X_STAR = np.array([755.3468135, 6.495391736, 15.97839194, 54.45473585, 0.2318694293,
                      0.0127041341, 0.003273669217, 5901801.868, 370.1899008, 7134.192217,
                      1438.845403, 722.8624513, 715.9829518, 0.09576820452, 0.09576820452,
                      0.00554890905, 0.09021929548, 18363.87569])

_BUILDERS = {
    "boyd": boyd_problem,
    "rosenbrock": rosenbrock_problem,
    "floudas": floudas_problem,
    "kirschen_ozturk": kirschen_ozturk_problem,
}


def get_case(name, constants=None, lower_bounds=None) -> BenchmarkCase:
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise KeyError(f"unknown benchmark {name!r}; choose from {', '.join(NAMES)}") from None
    return builder(constants=constants, lower_bounds=lower_bounds)
