"""Optional matplotlib helper shared by the demos."""
from pathlib import Path

OUT = Path(__file__).resolve().parent / "figures"


def figure(*args, **kwargs):
    """Return (plt, fig, axes), or None when matplotlib is not installed."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    fig, ax = plt.subplots(*args, **kwargs)
    return plt, fig, ax


def save(fig, name):
    OUT.mkdir(exist_ok=True)
    fig.savefig(OUT / name, dpi=120, bbox_inches="tight")
    print(f"saved {OUT / name}")
