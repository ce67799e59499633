"""Matplotlib renderings written next to the CSV outputs.

Every function takes data plus a target path and writes one PNG; nothing
is shown interactively (Agg backend).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .free_boundary import LABEL_CORE, LABEL_FB, RegionDecomposition
from .system_solver import IterationHistory, SolutionPair
from .theorems import FlatteningTable, GrowthProfile, LiouvilleReport

DPI = 150


def render_solution(pair: SolutionPair, path) -> None:
    grid = pair.grid
    if grid.dimension == 1:
        x = grid.coords[:, 0]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(x, pair.u.flat, label="u", lw=1.5)
        ax.plot(x, pair.v.flat, label="v", lw=1.5, ls="--")
        ax.set_xlabel("x")
        ax.legend()
    else:
        fig, axes = plt.subplots(1, 2, figsize=(9, 4))
        for ax, fld, name in ((axes[0], pair.u, "u"), (axes[1], pair.v, "v")):
            im = ax.imshow(fld.values.T, origin="lower",
                           extent=(grid.lower[0], grid.upper[0],
                                   grid.lower[1], grid.upper[1]))
            ax.set_title(name)
            fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def render_regions(decomposition: RegionDecomposition, path) -> None:
    grid = decomposition.grid
    labels = decomposition.labels
    if grid.dimension == 1:
        x = grid.coords[:, 0]
        fig, ax = plt.subplots(figsize=(6, 3))
        ax.plot(x, decomposition.magnitude_values, lw=1.2, label="|(u,v)|")
        ax.axhline(decomposition.eps, color="gray", lw=0.8, ls=":",
                   label="threshold")
        core = labels != 1
        ax.plot(x[core], np.zeros(core.sum()), "s", ms=3, color="tab:red",
                label="dead core")
        fb = labels == LABEL_FB
        ax.plot(x[fb], np.zeros(fb.sum()), "o", ms=5, color="k",
                label="free boundary")
        ax.set_xlabel("x")
        ax.legend(fontsize=8)
    else:
        fig, ax = plt.subplots(figsize=(5, 4.5))
        img = labels.reshape(grid.shape)
        im = ax.imshow(img.T, origin="lower",
                       extent=(grid.lower[0], grid.upper[0],
                               grid.lower[1], grid.upper[1]),
                       cmap="viridis")
        fig.colorbar(im, ax=ax, shrink=0.8,
                     label=f"label ({LABEL_CORE}=core, 1=positive, {LABEL_FB}=fb)")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def render_history(history: IterationHistory, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    its = np.arange(1, history.iterations + 1)
    ax.semilogy(its, history.res_u, label="residual u", lw=1.2)
    ax.semilogy(its, history.res_v, label="residual v", lw=1.2, ls="--")
    ax.set_xlabel("iteration")
    ax.set_ylabel("sup residual")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def render_profile(profile: GrowthProfile, path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.loglog(profile.radii, profile.sups, "o", ms=5, label="measured sup")
    fit = np.exp(profile.intercept) * profile.radii ** profile.slope
    ax.loglog(profile.radii, fit, "-", lw=1.2,
              label=f"fit slope {profile.slope:.3f}")
    ref = profile.sups[-1] / profile.radii[-1] ** profile.gamma \
        * profile.radii ** profile.gamma
    ax.loglog(profile.radii, ref, ":", lw=1.0,
              label=f"target slope {profile.gamma:.3f}")
    ax.set_xlabel("r")
    ax.set_ylabel("sup of magnitude over B_r")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def render_measure(report, path) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    if report.rho_list is not None:
        axes[0].plot(report.rho_list, report.min_fractions, "o-")
        axes[0].set_xlabel("ball radius")
        axes[0].set_ylabel("min positivity fraction")
    if report.box_sizes is not None:
        axes[1].loglog(1.0 / report.box_sizes, report.box_counts, "o-")
        axes[1].set_xlabel("1 / box size")
        axes[1].set_ylabel("occupied boxes")
        if report.box_dimension is not None:
            axes[1].set_title(f"box dimension {report.box_dimension:.2f}")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def render_compare(pair_super: SolutionPair, pair_sub: SolutionPair, path) -> None:
    grid = pair_super.grid
    fig, ax = plt.subplots(figsize=(6, 4))
    if grid.dimension == 1:
        x = grid.coords[:, 0]
        ax.plot(x, pair_super.u.flat, label="u super", lw=1.4)
        ax.plot(x, pair_sub.u.flat, label="u sub", lw=1.0, ls="--")
        ax.plot(x, pair_super.v.flat, label="v super", lw=1.4)
        ax.plot(x, pair_sub.v.flat, label="v sub", lw=1.0, ls="--")
        ax.set_xlabel("x")
        ax.legend(fontsize=8)
    else:
        gap = np.maximum(pair_super.u.values - pair_sub.u.values,
                         pair_super.v.values - pair_sub.v.values)
        im = ax.imshow(gap.T, origin="lower",
                       extent=(grid.lower[0], grid.upper[0],
                               grid.lower[1], grid.upper[1]))
        fig.colorbar(im, ax=ax, label="max{u*-u, v*-v}")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def render_flatten(table: FlatteningTable, path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.plot(table.deltas, table.sups, "o-")
    ax.set_xlabel("delta")
    ax.set_ylabel(f"sup of magnitude over B_{table.window_radius}")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def render_liouville(report: LiouvilleReport, path) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    axes[0].plot(report.radii, report.ratios, "o-", label="S_R / R^gamma")
    axes[0].axhline(report.threshold, color="gray", ls=":",
                    label="threshold m")
    axes[0].set_xlabel("R")
    axes[0].legend(fontsize=8)
    axes[1].semilogy(report.radii, np.maximum(report.window_sups, 1e-300), "o-")
    axes[1].set_xlabel("R")
    axes[1].set_ylabel("interior window sup")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
