"""Independent oracles shared by several test modules."""

import numpy as np

FD_REL_TOL = 1e-4
FD_ABS_FLOOR = 1e-8


def central_difference(f, params, step):
    """Central differences of scalar ``f()`` w.r.t. every entry of the arrays in ``params``.

    The arrays are perturbed in place and restored.
    """
    out = []
    for p in params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + step
            up = f()
            p[idx] = old - step
            down = f()
            p[idx] = old
            g[idx] = (up - down) / (2 * step)
        out.append(g)
    return out


def richardson_difference(f, params, step, relative=False):
    """Fourth-order central differences (Richardson on steps h and 2h).

    With ``relative`` the step at each entry is ``step * min(1, |p|)``, which keeps the
    stencil away from the log singularity at zero while allowing a large step elsewhere.
    """
    out = []
    for p in params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            h = step * min(1.0, abs(old)) if relative and old != 0 else step
            vals = []
            for k in (1, -1, 2, -2):
                p[idx] = old + k * h
                vals.append(f())
            p[idx] = old
            g[idx] = (8 * (vals[0] - vals[1]) - (vals[2] - vals[3])) / (12 * h)
        out.append(g)
    return out


def max_fd_violation(analytic, numeric) -> float:
    """Largest |a - f| / max(|a|, |f|) over entries not already within the absolute floor."""
    worst = 0.0
    for a, f in zip(analytic, numeric):
        a, f = np.asarray(a).ravel(), np.asarray(f).ravel()
        diff = np.abs(a - f)
        scale = np.maximum(np.abs(a), np.abs(f))
        mask = diff > FD_ABS_FLOOR
        if mask.any():
            worst = max(worst, float(np.max(diff[mask] / scale[mask])))
    return worst


def naive_hamming(a_signs, b_signs) -> int:
    return sum(1 for u, v in zip(a_signs, b_signs) if u != v)


def brute_force_ap(dists, relevant) -> float:
    """AP by definition: rank by (distance, id), average precision at each relevant hit."""
    order = sorted(range(len(dists)), key=lambda k: (dists[k], k))
    hits, total = 0, 0.0
    for pos, k in enumerate(order, 1):
        if relevant[k]:
            hits += 1
            total += hits / pos
    return total / hits if hits else 0.0


# (criterion number, title, passed, detail), filled by the acceptance module and
# printed by the terminal-summary hook in conftest.
ACCEPTANCE_RESULTS = []


def record(number: int, title: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((number, title, bool(passed), detail))
