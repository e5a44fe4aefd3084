"""Shared test utilities: finite-difference gradient oracle and tolerances."""
from __future__ import annotations

import numpy as np

from glpworld.numerics import GradTape, Parameter, RngStream


def fd_gradient_check(loss_fn, params: dict[str, Parameter], rng: RngStream,
                      n_probes: int = 12, h: float = 1e-5, rtol: float = 1e-4) -> float:
    """Compare tape gradients against central differences at random coordinates.

    loss_fn takes no arguments and returns a scalar Tensor built from the
    given float64 parameters. Returns the largest relative error seen.
    """
    with GradTape() as tape:
        loss = loss_fn()
    grads = tape.gradients(loss, params.values())
    worst = 0.0
    names = sorted(params)
    for _ in range(n_probes):
        name = rng.choice(names)
        p = params[name]
        if p.data.size == 0:
            continue
        flat_idx = int(rng.integers(0, p.data.size))
        idx = np.unravel_index(flat_idx, p.data.shape)
        orig = p.data[idx]
        p.data[idx] = orig + h
        up = loss_fn().item()
        p.data[idx] = orig - h
        down = loss_fn().item()
        p.data[idx] = orig
        fd = (up - down) / (2.0 * h)
        an = float(grads[name][idx])
        err = abs(fd - an) / max(abs(fd), abs(an), 1e-6)
        assert err < rtol, f"{name}{list(idx)}: analytic {an:.8g} vs fd {fd:.8g} (rel {err:.3g})"
        worst = max(worst, err)
    return worst
