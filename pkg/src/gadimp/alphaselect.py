"""Data-driven selection of the regularization parameter alpha.

Pipeline: grid-search optimal alphas on small instances, fit a Gaussian
process (RBF kernel, per-feature length scales, hyperparameters picked by
log-marginal-likelihood over a grid) on log(alpha), predict for larger
instances, then validate the predicted alpha against the safety gate
kappa(H) * kappa(S) * u_s < tau, escalating alpha until the gate passes.

Features are (log n_g, log2(1/u_s)) plus a problem-family one-hot when a
model mixes families; targets live in log space so predictions stay positive.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .analysis import condition_estimate
from .errors import AllDiverged, EscalationExhausted, IllConditionedGram
from .gadi import GadiConfig, gadi_solve
from .problems import Problem
from .precision import resolve_format
from .splitting import make_hss_splitting

__all__ = [
    "GprModel",
    "AlphaSelectConfig",
    "make_features",
    "grid_search_alpha",
    "gpr_fit",
    "gpr_predict",
    "select_alpha",
]

_NOISE_FLOOR = 1.0e-6


def make_features(n_g: int, u_s, family: str | None = None,
                  families: tuple[str, ...] = ()) -> np.ndarray:
    """Feature vector (log n_g, log2(1/u_s) [, family one-hot])."""
    u = resolve_format(u_s).unit_roundoff
    feats = [math.log(n_g), math.log2(1.0 / u)]
    for f in families:
        feats.append(1.0 if f == family else 0.0)
    return np.array(feats)


@dataclass
class GprModel:
    training_inputs: np.ndarray    # (m, d)
    training_targets: np.ndarray   # log(alpha_opt), shape (m,)
    signal_variance: float
    length_scales: np.ndarray      # per feature, shape (d,)
    noise_variance: float
    families: tuple[str, ...] = ()
    _chol: tuple | None = field(default=None, repr=False, compare=False)
    _alpha_weights: np.ndarray | None = field(default=None, repr=False,
                                              compare=False)

    def _kernel(self, xa: np.ndarray, xb: np.ndarray) -> np.ndarray:
        d = (xa[:, None, :] - xb[None, :, :]) / self.length_scales
        return self.signal_variance * np.exp(-0.5 * np.sum(d * d, axis=-1))

    def _factorize(self):
        if self._chol is None:
            k = self._kernel(self.training_inputs, self.training_inputs)
            k[np.diag_indices_from(k)] += self.noise_variance
            self._chol = scipy.linalg.cho_factor(k, lower=True)
            self._alpha_weights = scipy.linalg.cho_solve(
                self._chol, self.training_targets)
        return self._chol

    def to_dict(self) -> dict:
        return {
            "training_inputs": self.training_inputs.tolist(),
            "training_targets": self.training_targets.tolist(),
            "signal_variance": self.signal_variance,
            "length_scales": self.length_scales.tolist(),
            "noise_variance": self.noise_variance,
            "families": list(self.families),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GprModel":
        return cls(
            training_inputs=np.asarray(d["training_inputs"], dtype=float),
            training_targets=np.asarray(d["training_targets"], dtype=float),
            signal_variance=float(d["signal_variance"]),
            length_scales=np.asarray(d["length_scales"], dtype=float),
            noise_variance=float(d["noise_variance"]),
            families=tuple(d.get("families", ())),
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load(cls, path) -> "GprModel":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass
class AlphaSelectConfig:
    tau: float = 0.01
    escalation_factor: float = 2.0
    max_escalations: int = 20
    candidate_grid: np.ndarray = field(
        default_factory=lambda: np.logspace(-2, 2, 13))
    check_condition: bool = True
    dense_cap: int = 2048

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        if not self.escalation_factor > 1.0:
            raise ValueError("escalation_factor must be > 1")


def grid_search_alpha(problem: Problem, candidates, cfg: GadiConfig):
    """Solve once per candidate alpha; return the alpha minimizing outer
    iterations (ties: fewer total inner iterations, then smaller alpha)."""
    candidates = [float(c) for c in candidates]
    if not candidates or any(c <= 0 for c in candidates):
        raise ValueError("candidates must be a nonempty list of positive reals")
    results = []
    counts = []
    for alpha in sorted(candidates):
        run_cfg = dataclasses.replace(cfg, alpha=alpha)
        report = gadi_solve(problem, cfg=run_cfg)
        counts.append((alpha, report.status, report.iterations,
                       report.total_inner_iterations))
        if report.status == "Converged":
            results.append((report.iterations, report.total_inner_iterations,
                            alpha))
    if not results:
        raise AllDiverged("no candidate alpha converged")
    best = min(results)
    return best[2], counts


def _log_marginal_likelihood(x, y, sf2, ls, sn2):
    d = (x[:, None, :] - x[None, :, :]) / ls
    k = sf2 * np.exp(-0.5 * np.sum(d * d, axis=-1))
    k[np.diag_indices_from(k)] += sn2
    try:
        c, low = scipy.linalg.cho_factor(k, lower=True)
    except scipy.linalg.LinAlgError:
        return -np.inf
    alpha = scipy.linalg.cho_solve((c, low), y)
    return float(-0.5 * y @ alpha - np.sum(np.log(np.diag(c)))
                 - 0.5 * len(y) * np.log(2.0 * np.pi))


def _default_hyper_grid(x: np.ndarray):
    spans = np.ptp(x, axis=0)
    spans = np.where(spans > 0, spans, 1.0)
    grid = []
    for sf2 in (0.25, 1.0, 4.0, 16.0):
        for mult in (0.25, 0.5, 1.0, 2.0, 4.0):
            for sn2 in (_NOISE_FLOOR, 1.0e-4, 1.0e-2):
                grid.append({"signal_variance": sf2,
                             "length_scales": mult * spans,
                             "noise_variance": sn2})
    return grid


def gpr_fit(x, y, hyper_grid=None, families: tuple[str, ...] = ()) -> GprModel:
    """Fit the RBF-kernel GP, choosing hyperparameters by maximum log
    marginal likelihood over ``hyper_grid``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    if x.shape[0] < 2:
        raise ValueError("need at least 2 training points")
    if hyper_grid is None:
        hyper_grid = _default_hyper_grid(x)
    best, best_lml = None, -np.inf
    for hp in hyper_grid:
        ls = np.broadcast_to(np.asarray(hp["length_scales"], dtype=float),
                             (x.shape[1],))
        lml = _log_marginal_likelihood(x, y, hp["signal_variance"], ls,
                                       hp["noise_variance"])
        if lml > best_lml:
            best, best_lml = hp, lml
    if best is None or not np.isfinite(best_lml):
        # every Gram factorization failed: raise the noise floor and retry once
        retry = [dict(hp, noise_variance=max(hp["noise_variance"], 1.0e-2))
                 for hp in hyper_grid]
        for hp in retry:
            ls = np.broadcast_to(np.asarray(hp["length_scales"], dtype=float),
                                 (x.shape[1],))
            lml = _log_marginal_likelihood(x, y, hp["signal_variance"], ls,
                                           hp["noise_variance"])
            if lml > best_lml:
                best, best_lml = hp, lml
        if best is None or not np.isfinite(best_lml):
            raise IllConditionedGram("no hyperparameter candidate factorized")
    model = GprModel(
        training_inputs=x, training_targets=y,
        signal_variance=float(best["signal_variance"]),
        length_scales=np.broadcast_to(
            np.asarray(best["length_scales"], dtype=float),
            (x.shape[1],)).copy(),
        noise_variance=float(max(best["noise_variance"], _NOISE_FLOOR)),
        families=families,
    )
    model._factorize()
    return model


def gpr_predict(model: GprModel, x) -> tuple[float, float]:
    """Posterior mean and variance at a single feature vector."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    chol = model._factorize()
    k_star = model._kernel(model.training_inputs, x)[:, 0]
    mean = float(k_star @ model._alpha_weights)
    v = scipy.linalg.cho_solve(chol, k_star)
    var = float(model.signal_variance - k_star @ v)
    return mean, max(var, 0.0)


def predict_alpha(model: GprModel, features) -> float:
    mean, _ = gpr_predict(model, features)
    return math.exp(mean)


def select_alpha(problem: Problem, model: GprModel,
                 sel_cfg: AlphaSelectConfig, cfg: GadiConfig,
                 features=None):
    """Predict alpha, then escalate it until the safety gate passes.

    With condition checking enabled the gate is kappa(H)*kappa(S)*u_s < tau;
    otherwise a probe solve is run and escalation is triggered by stagnation
    or divergence.
    """
    if features is None:
        features = make_features(problem.params.get("n_g", problem.n),
                                 cfg.u_s, problem.label, model.families)
    alpha = predict_alpha(model, features)
    u_s = resolve_format(cfg.u_s).unit_roundoff
    trace = []
    for step in range(sel_cfg.max_escalations + 1):
        if sel_cfg.check_condition:
            split = make_hss_splitting(problem.A, alpha, cfg.u_s)
            gate = (condition_estimate(split.H, sel_cfg.dense_cap)
                    * condition_estimate(split.S, sel_cfg.dense_cap) * u_s)
            ok = gate < sel_cfg.tau
            trace.append({"step": step, "alpha": alpha, "gate": gate,
                          "passed": ok})
        else:
            probe = gadi_solve(problem,
                               cfg=dataclasses.replace(cfg, alpha=alpha))
            ok = probe.status not in ("Stagnated", "Diverged")
            trace.append({"step": step, "alpha": alpha,
                          "probe_status": probe.status, "passed": ok})
        if ok:
            return alpha, trace
        alpha *= sel_cfg.escalation_factor
    raise EscalationExhausted(
        f"gate still failing after {sel_cfg.max_escalations} escalations")
