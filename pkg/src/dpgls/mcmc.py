"""Chain configuration and containers shared by the SUR and panel samplers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class McmcConfig:
    """Sweep counts and seeding for one chain.

    ``alpha`` fixes the concentration-prior configuration; when ``None`` the
    bounds are calibrated from the number of items with ``k_max_frac``.
    """

    n_sweeps: int = 12_000
    burn_in: int = 2_000
    thin: int = 1
    seed: int = 0
    stream_id: int = 0
    alpha: object = None
    k_max_frac: float = 0.05
    tau: float = 0.8
    grid_size: int = 100
    keep_values: bool = False

    def __post_init__(self):
        if not 0 <= self.burn_in < self.n_sweeps:
            raise ValidationError("burn_in must be non-negative and below n_sweeps")
        if self.thin < 1:
            raise ValidationError("thin must be at least 1")

    def keep(self, sweep):
        return sweep >= self.burn_in and (sweep - self.burn_in) % self.thin == 0

    @property
    def n_kept(self):
        return len(range(self.burn_in, self.n_sweeps, self.thin))


@dataclass
class Chains:
    """Kept draws of the coefficients plus any auxiliary scalar chains.

    ``extra`` maps names such as ``"K"`` or ``"alpha"`` to 1-d arrays of the
    same length as ``beta``.
    """

    beta: np.ndarray
    names: list
    extra: dict = field(default_factory=dict)
    values: list = None

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        for k, v in self.extra.items():
            if len(v) != len(self.beta):
                raise ValidationError(f"chain {k!r} has length {len(v)}, expected {len(self.beta)}")

    def __len__(self):
        return self.beta.shape[0]

    def posterior_mean(self):
        return self.beta.mean(axis=0)

    def posterior_sd(self):
        return self.beta.std(axis=0, ddof=1)

    def mode(self, name):
        vals, counts = np.unique(np.asarray(self.extra[name]), return_counts=True)
        return vals[np.argmax(counts)]

    def as_table(self):
        """Column names and a (draws, columns) matrix, coefficients first."""
        cols = list(self.names) + list(self.extra)
        data = np.column_stack([self.beta] + [np.asarray(v, dtype=float) for v in self.extra.values()])
        return cols, data


class ChainRecorder:
    def __init__(self, cfg: McmcConfig, p: int, extras=()):
        n = cfg.n_kept
        self.cfg = cfg
        self.beta = np.empty((n, p))
        self.extra = {k: np.empty(n) for k in extras}
        self.values = [] if cfg.keep_values else None
        self.i = 0

    def record(self, sweep, beta, values=None, **extra):
        if not self.cfg.keep(sweep):
            return
        self.beta[self.i] = beta
        for k, v in extra.items():
            self.extra[k][self.i] = v
        if self.values is not None:
            self.values.append(values)
        self.i += 1

    def finish(self, names):
        return Chains(self.beta[: self.i], list(names), {k: v[: self.i] for k, v in self.extra.items()},
                      self.values)
