"""Output file names; each is a fixed function of the experiment and its key."""

SUMMARY = "summary.json"
TIMING = "timing.json"
SUPNORM_FIT = "supnorm_fit.json"
REMAINDER_FIT = "remainder_fit.json"
GLOBAL_WEYL = "global_weyl.csv"
FLOW = "flow.json"
TRACE = "trace.json"


def weyl_csv(point: str) -> str:
    return f"weyl_{point}.csv"


def remainder_csv(point: str) -> str:
    return f"remainder_{point}.csv"


def supnorm_csv(point: str) -> str:
    return f"supnorm_{point}.csv"


def mu_csv(T: float) -> str:
    return f"mu_T{T:.4f}.csv"


def loopset_csv(point: str) -> str:
    return f"loopset_{point}.csv"


def loopset_json(point: str) -> str:
    return f"loopset_{point}.json"


def plot_file(quantity: str, point: str | None = None) -> str:
    return f"plot_{quantity}.dat" if point is None else f"plot_{quantity}_{point}.dat"
