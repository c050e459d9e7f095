"""Plot the diagnostics of one run from its CSV tables (needs matplotlib).

    python scripts/plot_run.py results/reference
"""
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def load(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {k: data[k] for k in data.dtype.names}


def main(prefix):
    diag = load(f"{prefix}.diagnostics.csv")
    err = load(f"{prefix}.error_terms.csv")
    sh = load(f"{prefix}.shifts.csv")
    fig, ax = plt.subplots(1, 3, figsize=(14, 4))
    ax[0].semilogy(diag["t"], diag["metric"], label="distance to shifted profile")
    ax[0].semilogy(diag["t"], diag["linf_phi_psi"], label="sup |v - v~|, |u - u~|")
    ax[0].set_xlabel("t")
    ax[0].legend()
    ax[1].semilogy(err["t"], err["H1_H2norm"], label="||H1||_H2")
    ax[1].semilogy(err["t"], err["H2_H1norm"], label="||H2||_H1")
    ax[1].set_xlabel("t")
    ax[1].legend()
    ax[2].plot(sh["t"], sh["X"], label="X (ODE)")
    ax[2].plot(sh["t"], sh["Y"], label="Y (ODE)")
    ax[2].plot(diag["t"], diag["X"], "k.", ms=3, label="X (solver)")
    ax[2].set_xlabel("t")
    ax[2].legend()
    fig.tight_layout()
    fig.savefig(f"{prefix}.png", dpi=120)
    print(f"wrote {prefix}.png")


if __name__ == "__main__":
    main(sys.argv[1])
