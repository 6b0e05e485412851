"""Block-coordinate optimizers for the joint communication/sensing design.

Three solvers share one evaluation core:

* run_hao_sca: block-coordinate ascent on the composite objective. Each block
  (beamformers, powers, split coefficients) moves along the gradient of a
  surrogate whose interference denominators are frozen at the block anchor,
  with step acceptance decided on the true penalized objective, so every
  iteration is monotone by construction and falls back to the entry iterate
  when no improving step exists.
* run_e_wmmse: alternating closed-form MMSE receive filters and weights with
  per-stream regularized normal equations for the beamformers; sensing is
  pulled in through a quadratic penalty on the echo-SINR shortfall.
* run_fp: fractional-programming baseline on private streams only, with
  auxiliary variables refreshed to 1 + SINR between gradient passes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import sensing_channel
from .geometry import ArrayGeometry, array_response, steering_derivative
from .objective import ObjectiveWeights, QosLimits
from .rates import Grouping, RsNomaSolution, default_grouping
from .sensing import q_inverse

_LN2 = np.log(2.0)
_MONO_SLACK = 1e-9


@dataclass(frozen=True)
class OptimizerConfig:
    """Shared solver knobs.

    inner_steps is the per-block gradient step budget; step_size is the
    initial (normalized-direction) step, shrunk by `backtrack` on rejection.
    qos_penalty weights the quadratic hinge on rate/detection/CRLB shortfalls.
    """

    max_iters: int = 50
    epsilon: float = 1e-4
    inner_steps: int = 20
    step_size: float = 0.1
    backtrack: float = 0.5
    max_backtracks: int = 8
    qos_penalty: float = 10.0
    adaptive_weights: bool = False

    def __post_init__(self):
        if self.max_iters < 1 or self.inner_steps < 0:
            raise ValueError("max_iters must be >= 1 and inner_steps >= 0")
        if self.epsilon <= 0.0 or self.step_size <= 0.0:
            raise ValueError("epsilon and step_size must be > 0")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError(f"backtrack factor must be in (0, 1), got {self.backtrack}")


@dataclass
class ConvergenceTrace:
    """Per-iteration objective values and constraint-violation norms."""

    objectives: np.ndarray
    violations: np.ndarray
    iterations_used: int
    converged: bool

    @property
    def monotone(self) -> bool:
        """True when the objective never drops by more than 1e-9."""
        return bool(np.all(np.diff(self.objectives) >= -_MONO_SLACK))


# =====================================================================
# SCA surrogate
# =====================================================================

def sca_surrogate_gamma(w: np.ndarray, w_anchor: np.ndarray, h: np.ndarray,
                        interference: float, sigma_n2: float) -> float:
    """Concave lower bound of the SINR |h^H w|^2 / (I + sigma_n2) around
    w_anchor with the interference frozen:

    (2 Re{(w_anchor^H h)(h^H w)} - |h^H w_anchor|^2) / (I + sigma_n2).

    Tight (equal to the true SINR) at w = w_anchor.
    """
    if interference < 0.0 or sigma_n2 <= 0.0:
        raise ValueError("interference must be >= 0 and sigma_n2 > 0")
    denom = interference + sigma_n2
    cross = np.vdot(w_anchor, h) * np.vdot(h, w)
    return float((2.0 * np.real(cross) - np.abs(np.vdot(h, w_anchor)) ** 2) / denom)


# =====================================================================
# Shared evaluation core
# =====================================================================

class _EvalContext:
    """Precomputed per-instance quantities plus the fast objective evaluator.

    Works on the stacked representation (W rows = unit beamformers in the
    order commons, privates, sensing; p = matching powers; rho = split
    coefficients) so one complex GEMM prices all stream gains.
    """

    def __init__(self, channels, targets, geom: ArrayGeometry,
                 weights: ObjectiveWeights, limits: QosLimits,
                 sigma_n2: float, sigma_s2: float, grouping: Grouping,
                 qos_penalty: float):
        self.h = np.asarray(channels, dtype=complex)
        self.hc = self.h.conj()
        self.k_total, self.m_total = self.h.shape
        self.geom = geom
        self.weights = weights
        self.limits = limits
        self.sigma_n2 = float(sigma_n2)
        self.sigma_s2 = float(sigma_s2)
        self.grouping = grouping
        self.num_groups = grouping.num_groups
        self.qos_penalty = float(qos_penalty)

        self.assign = grouping.assignment
        self.mask = grouping.interference_mask()
        self.members = [grouping.members(g) for g in range(self.num_groups)]

        self.steer = np.vstack([
            array_response(geom, t.theta, t.phi, t.r) for t in targets
        ]) if len(targets) else np.zeros((0, self.m_total), dtype=complex)
        self.steer_c = self.steer.conj()
        amp = np.array([sensing_channel(geom, t).amplitude for t in targets])
        rcs = np.array([t.rcs for t in targets])
        self.echo_power = rcs * amp**2
        self.num_targets = len(targets)

        # detection constraint folded to a minimum echo SINR
        if limits.p_d_min > limits.p_fa:
            q_fa = q_inverse(limits.p_fa)
            q_d = q_inverse(limits.p_d_min)
            self.gamma_min = 0.5 * (q_fa - q_d) ** 2
        else:
            self.gamma_min = 0.0
        # CRLB numerators c_l with crlb_l = c_l / p_sensing
        if np.isfinite(limits.crlb_max) and self.num_targets:
            self.crlb_num = np.array([
                sigma_s2 / (2.0 * t.rcs * float(np.real(np.vdot(
                    steering_derivative(geom, t.theta, t.phi, t.r, mode="fd"),
                    steering_derivative(geom, t.theta, t.phi, t.r, mode="fd")))))
                for t in targets
            ])
        else:
            self.crlb_num = None

    # -- stream slicing helpers ---------------------------------------
    @property
    def num_streams(self) -> int:
        return self.num_groups + self.k_total + 1

    def split_solution(self, solution: RsNomaSolution):
        return solution.stacked_beams(), solution.stacked_powers(), solution.rho.copy()

    def build_solution(self, w, p, rho) -> RsNomaSolution:
        g, k = self.num_groups, self.k_total
        return RsNomaSolution(
            grouping=self.grouping,
            w_common=w[:g].copy(), w_private=w[g:g + k].copy(),
            w_sensing=w[-1].copy(),
            p_common=p[:g].copy(), p_private=p[g:g + k].copy(),
            p_sensing=float(p[-1]), rho=rho.copy(),
        )

    def shares(self, rho: np.ndarray) -> np.ndarray:
        """Per-user share of the own-group common capacity under rho."""
        out = np.empty(self.k_total)
        for g in range(self.num_groups):
            mem = self.members[g]
            r = rho[mem]
            tot = r.sum()
            out[mem] = (r / tot) if tot > 1e-9 else 1.0 / len(mem)
        return out

    # -- full evaluation ----------------------------------------------
    def evaluate(self, w: np.ndarray, p: np.ndarray, rho: np.ndarray,
                 shares: np.ndarray | None = None):
        """Penalized composite objective plus every intermediate quantity.

        Callers that hold rho fixed may pass the precomputed share vector to
        skip its recomputation in hot loops."""
        g, k = self.num_groups, self.k_total
        v = self.hc @ w.T                      # (K, S)
        g2 = np.abs(v) ** 2
        pc, pp, ps = p[:g], p[g:g + k], p[-1]

        own_col = self.assign                  # user k's common column
        all_c = g2[:, :g] @ pc
        own_c = g2[np.arange(k), own_col] * pc[own_col]
        all_p = g2[:, g:g + k] @ pp
        sense = g2[:, -1] * ps
        i_common = all_c - own_c + all_p + sense
        i_private = (all_c - own_c) + (g2[:, g:g + k] * self.mask) @ pp + sense

        own_p = g2[np.arange(k), g + np.arange(k)] * pp
        d_c = i_common + self.sigma_n2
        d_p = i_private + self.sigma_n2
        gam_c = own_c / d_c
        gam_p = own_p / d_p
        c_rate = np.log2(1.0 + gam_c)
        p_rate = np.log2(1.0 + gam_p)

        if shares is None:
            shares = self.shares(rho)
        group_c = np.array([c_rate[mem].min() for mem in self.members])
        alloc = group_c[self.assign] * shares
        total_rate = alloc + p_rate
        rate_sum = float(total_rate.sum())

        if self.num_targets:
            va = self.steer_c @ w.T            # (L, S)
            m2 = np.abs(va) ** 2
            beam_sum = m2 @ p
            echoes = self.echo_power * beam_sum**2
            tot = echoes.sum()
            d_l = tot - echoes + self.sigma_s2
            gam_l = echoes / d_l
            util = float(np.sum(np.log2(1.0 + gam_l)))
        else:
            va = np.zeros((0, self.num_streams))
            m2 = va
            beam_sum = np.zeros(0)
            gam_l = np.zeros(0)
            d_l = np.zeros(0)
            util = 0.0

        ptot = float(p.sum())
        ee = rate_sum / ptot if ptot > 0.0 else 0.0
        if np.any(total_rate > 0.0):
            fair = float(total_rate.sum() ** 2 / (k * float(total_rate @ total_rate)))
        else:
            fair = 0.0

        aw = self.weights.as_array()
        value = float(aw @ np.array([rate_sum, util, ee, fair]))

        rate_short = np.maximum(0.0, self.limits.r_min - total_rate)
        det_short = np.maximum(0.0, self.gamma_min - gam_l)
        penalty = self.qos_penalty * (float(rate_short @ rate_short)
                                      + float(det_short @ det_short))
        if self.crlb_num is not None:
            crlb = self.crlb_num / ps if ps > 0.0 else np.full(self.num_targets, np.inf)
            crlb_short = np.minimum(np.maximum(0.0, crlb / self.limits.crlb_max - 1.0), 1e9)
            penalty += self.qos_penalty * float(crlb_short @ crlb_short)

        aux = {
            "v": v, "g2": g2, "va": va, "m2": m2, "beam_sum": beam_sum,
            "d_c": d_c, "d_p": d_p, "d_l": d_l, "gam_c": gam_c, "gam_p": gam_p,
            "gam_l": gam_l, "c_rate": c_rate, "p_rate": p_rate,
            "group_c": group_c, "alloc": alloc, "total_rate": total_rate,
            "rate_sum": rate_sum, "util": util, "ee": ee, "fair": fair,
            "ptot": ptot, "value": value, "penalty": penalty,
        }
        return value - penalty, aux

    def violation_norm(self, p, aux) -> float:
        """Euclidean norm of all constraint shortfalls at this iterate."""
        shorts = [max(0.0, p.sum() - self.limits.p_max)]
        shorts.extend(np.maximum(0.0, self.limits.r_min - aux["total_rate"]))
        shorts.extend(np.maximum(0.0, self.gamma_min - aux["gam_l"]))
        if self.crlb_num is not None:
            ps = p[-1]
            crlb = self.crlb_num / ps if ps > 0.0 else np.full(self.num_targets, np.inf)
            shorts.extend(np.minimum(np.maximum(0.0, crlb - self.limits.crlb_max), 1e9))
        return float(np.linalg.norm(shorts))

    # -- gradient assembly --------------------------------------------
    def _user_weights(self, aux) -> np.ndarray:
        """Effective per-user weight on a unit rate increase (objective share
        plus any active QoS-shortfall pressure)."""
        a = self.weights.as_array()
        base = a[0] + (a[2] / aux["ptot"] if aux["ptot"] > 0.0 else 0.0)
        short = np.maximum(0.0, self.limits.r_min - aux["total_rate"])
        return base + 2.0 * self.qos_penalty * short

    def _target_weights(self, aux) -> np.ndarray:
        a = self.weights.as_array()
        gam = aux["gam_l"]
        short = np.maximum(0.0, self.gamma_min - gam)
        return a[1] / _LN2 / (1.0 + gam) + 2.0 * self.qos_penalty * short

    def _common_blend(self, c_rate: np.ndarray) -> np.ndarray:
        """Per-user weight on the group-minimum common rate.

        At an exact tie any convex combination of member gradients is a valid
        subgradient of the min; softmin weights realize that and keep the
        direction from flip-flopping between near-tied members."""
        out = np.zeros(self.k_total)
        for mem in self.members:
            r = c_rate[mem]
            lo = float(r.min())
            tau = max(0.1 * (1.0 + lo), 1e-9)
            b = np.exp(-(r - lo) / tau)
            out[mem] = b / b.sum()
        return out

    def beam_gradient(self, w, p, rho, aux, anchor) -> np.ndarray:
        """Ascent direction for all beamformers.

        Same construction as the power gradient: signal quadratics are
        minorized at the current iterate, interference enters through its
        linearization at the block anchor, so streams feel the damage they
        do to other streams. Returned as the conjugate-coordinate gradient,
        one row per stream."""
        g, k = self.num_groups, self.k_total
        d_c0, d_p0, d_l0 = anchor
        g2, v = aux["g2"], aux["v"]
        ar = np.arange(k)
        own_col = self.assign

        u = self._user_weights(aux)
        shares = self.shares(rho)
        group_u = np.zeros(g)
        for gi in range(g):
            mem = self.members[gi]
            group_u[gi] = float(np.sum(u[mem] * shares[mem]))
        wc = self._common_blend(aux["c_rate"]) * group_u[own_col]

        own_c = g2[ar, own_col] * p[own_col]
        own_p = g2[ar, g + ar] * p[g:g + k]

        # 0/1 tables of which stream is interference to user k at each stage
        hear_c = np.ones((k, self.num_streams))
        hear_c[ar, own_col] = 0.0
        hear_p = np.ones((k, self.num_streams))
        hear_p[ar, own_col] = 0.0
        hear_p[:, g:g + k] = self.mask
        own_sig = np.zeros((k, self.num_streams))
        own_sig[ar, g + ar] = 1.0

        cmat = (wc / _LN2)[:, None] * p[None, :] \
            * (1.0 / (own_c + aux["d_c"])[:, None] - hear_c / d_c0[:, None])
        pmat = (u / _LN2)[:, None] * p[None, :] \
            * ((own_sig + hear_p) / (own_p + aux["d_p"])[:, None]
               - hear_p / d_p0[:, None])
        grad = ((cmat + pmat) * v).T @ self.h

        if self.num_targets:
            va, beam_sum = aux["va"], aux["beam_sum"]
            d_l, gam_l = aux["d_l"], aux["gam_l"]
            tot = float((self.echo_power * beam_sum**2).sum())
            a1 = self.weights.as_array()[1]
            short = np.maximum(0.0, self.gamma_min - gam_l)
            inv0 = 1.0 / d_l0
            base = a1 / _LN2 * (self.num_targets / (tot + self.sigma_s2)
                                - (inv0.sum() - inv0))
            sg = short * gam_l / d_l
            pen = 2.0 * self.qos_penalty * (short / d_l - (sg.sum() - sg))
            cs = (2.0 * self.echo_power * beam_sum * (base + pen))[:, None] \
                * p[None, :]
            grad += (cs * va).T @ self.steer
        return grad

    def power_gradient(self, w, p, rho, aux, anchor) -> np.ndarray:
        """Gradient of the linearized-interference composite in the powers.

        Signal-plus-interference terms are evaluated at the current powers
        while each interference denominator enters through its first-order
        expansion around the block anchor, so at the anchor itself this
        coincides with the exact gradient of the true objective. That keeps
        the interference cost of every stream visible: power drains away
        from streams that hurt other streams more than they carry."""
        g, k = self.num_groups, self.k_total
        d_c0, d_p0, d_l0 = anchor
        g2 = aux["g2"]
        grad = np.zeros(self.num_streams)
        ar = np.arange(k)
        own_col = self.assign

        u = self._user_weights(aux)
        shares = self.shares(rho)
        group_u = np.zeros(g)
        for gi in range(g):
            mem = self.members[gi]
            group_u[gi] = float(np.sum(u[mem] * shares[mem]))
        wc = self._common_blend(aux["c_rate"]) * group_u[own_col]

        # common stage: S+D sums every stream, so its derivative is g2 itself
        own_c = g2[ar, own_col] * p[own_col]
        cfac = wc / _LN2 / (own_c + aux["d_c"])
        grad += cfac @ g2
        lfac = wc / _LN2 / d_c0
        grad -= lfac @ g2
        np.add.at(grad, own_col, lfac * g2[ar, own_col])

        # private stage: own common is cancelled, privates heard per SIC mask
        own_p = g2[ar, g + ar] * p[g:g + k]
        dmat = g2.copy()
        dmat[ar, own_col] = 0.0
        dmat[:, g:g + k] *= self.mask
        numer = dmat.copy()
        numer[ar, g + ar] = g2[ar, g + ar]
        pfac = u / _LN2 / (own_p + aux["d_p"])
        grad += pfac @ numer
        grad -= (u / _LN2 / d_p0) @ dmat

        if self.num_targets:
            m2, beam_sum, d_l = aux["m2"], aux["beam_sum"], aux["d_l"]
            gam_l = aux["gam_l"]
            de = (2.0 * self.echo_power * beam_sum)[:, None] * m2
            dt = de.sum(axis=0)
            tot = float((self.echo_power * beam_sum**2).sum())
            a1 = self.weights.as_array()[1]
            if a1 > 0.0:
                grad += a1 / _LN2 * (self.num_targets * dt / (tot + self.sigma_s2)
                                     - (1.0 / d_l0) @ (dt[None, :] - de))
            short = np.maximum(0.0, self.gamma_min - gam_l)
            if np.any(short > 0.0):
                dgam = (de - gam_l[:, None] * (dt[None, :] - de)) / d_l[:, None]
                grad += (2.0 * self.qos_penalty * short) @ dgam

        a = self.weights.as_array()
        if aux["ptot"] > 0.0:
            grad -= a[2] * aux["rate_sum"] / aux["ptot"] ** 2
        if self.crlb_num is not None:
            ps = p[-1]
            if ps > 0.0:
                crlb = self.crlb_num / ps
                short = np.maximum(0.0, crlb / self.limits.crlb_max - 1.0)
                grad[-1] += float(np.sum(2.0 * self.qos_penalty * short
                                         * self.crlb_num
                                         / (self.limits.crlb_max * ps**2)))
            else:
                grad[-1] += self.qos_penalty
        return grad


def _normalize_rows(w: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(w, axis=1)
    out = np.where(norms[:, None] > 1e-300, w / np.maximum(norms, 1e-300)[:, None],
                   fallback)
    return out


def _project_powers(p: np.ndarray, p_max: float) -> np.ndarray:
    """Scale-then-clip projection onto the simplex-like budget set, twice."""
    out = p.copy()
    for _ in range(2):
        out = np.maximum(out, 0.0)
        total = out.sum()
        if total > p_max:
            out *= p_max / total
    return np.maximum(out, 0.0)


# =====================================================================
# Block updates
# =====================================================================

def _beam_block(ctx: _EvalContext, w, p, rho, f0, aux0, config: OptimizerConfig,
                frozen_streams=None):
    """Gradient pass over the beamformers. Never returns a worse iterate.

    A joint step over all rows is tried first; when it is rejected the rows
    are retried one at a time with the same gradient, so streams whose
    directions conflict cannot deadlock the whole block."""
    anchor = (aux0["d_c"], aux0["d_p"], aux0["d_l"])
    best_w, best_f, best_aux = w, f0, aux0
    frozen = np.zeros(w.shape[0], dtype=bool)
    if frozen_streams is not None:
        frozen[frozen_streams] = True
    shares = ctx.shares(rho)
    eta = config.step_size
    row_eta = np.full(w.shape[0], config.step_size)
    joint_ok = True
    for _ in range(config.inner_steps):
        grad = ctx.beam_gradient(best_w, p, rho, best_aux, anchor)
        if not np.all(np.isfinite(grad)):
            raise RuntimeError("non-finite beamformer gradient")
        grad[frozen] = 0.0
        # tangent direction on the unit spheres; scaled by the largest row so
        # weak streams move proportionally less instead of jittering
        radial = np.real(np.sum(grad.conj() * best_w, axis=1))
        tang = grad - radial[:, None] * best_w
        tn = np.linalg.norm(tang, axis=1)
        if tn.max() < 1e-14:
            break
        accepted = False
        if joint_ok:
            direction = tang / tn.max()
            step = eta
            for _bt in range(config.max_backtracks):
                cand = _normalize_rows(best_w + step * direction, best_w)
                f_c, aux_c = ctx.evaluate(cand, p, rho, shares)
                if f_c > best_f:
                    best_w, best_f, best_aux = cand, f_c, aux_c
                    eta = min(step * 1.5, 1.0)
                    accepted = True
                    break
                step *= config.backtrack
            if not accepted:
                joint_ok = False
        if not accepted:
            # one row at a time, most promising first; stop at the first
            # improvement so the next pass works with a fresh gradient
            for j in np.argsort(-tn):
                if frozen[j] or tn[j] < 1e-14:
                    continue
                dir_j = tang[j] / tn[j]
                step = row_eta[j]
                for _bt in range(4):
                    row = best_w[j] + step * dir_j
                    nr = np.linalg.norm(row)
                    if nr >= 1e-300:
                        cand = best_w.copy()
                        cand[j] = row / nr
                        f_c, aux_c = ctx.evaluate(cand, p, rho, shares)
                        if f_c > best_f:
                            best_w, best_f, best_aux = cand, f_c, aux_c
                            row_eta[j] = min(step * 1.5, 1.0)
                            accepted = True
                            break
                    step *= config.backtrack
                if accepted:
                    break
                row_eta[j] = max(step, 1e-3)
        if not accepted:
            break
    return best_w, best_f, best_aux


def _power_block(ctx: _EvalContext, w, p, rho, f0, aux0, config: OptimizerConfig,
                 frozen_streams=None):
    """Gradient pass over the stream powers under the budget projection."""
    anchor = (aux0["d_c"], aux0["d_p"], aux0["d_l"])
    best_p, best_f, best_aux = p, f0, aux0
    shares = ctx.shares(rho)
    eta = config.step_size
    for _ in range(config.inner_steps):
        grad = ctx.power_gradient(w, best_p, rho, best_aux, anchor)
        if not np.all(np.isfinite(grad)):
            raise RuntimeError("non-finite power gradient")
        if frozen_streams is not None:
            grad[frozen_streams] = 0.0
        gn = np.linalg.norm(grad)
        if gn < 1e-14:
            break
        direction = grad / gn
        accepted = False
        for _bt in range(config.max_backtracks):
            cand = _project_powers(best_p + eta * ctx.limits.p_max * direction,
                                   ctx.limits.p_max)
            if frozen_streams is not None:
                cand[frozen_streams] = 0.0
            f_c, aux_c = ctx.evaluate(w, cand, rho, shares)
            if f_c > best_f:
                best_p, best_f, best_aux = cand, f_c, aux_c
                eta = min(eta * 1.5, 1.0)
                accepted = True
                break
            eta *= config.backtrack
        if not accepted:
            break
    return best_p, best_f, best_aux


_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _rho_block(ctx: _EvalContext, w, p, rho, f0, aux0, config: OptimizerConfig):
    """Golden-section coordinate maximization of each rho_k on [0, 1].

    Only the common-capacity split depends on rho, so candidates are priced
    through a reduced objective; a move is kept only when it strictly
    improves the full objective.
    """
    best_rho, best_f, best_aux = rho, f0, aux0
    for g in range(ctx.num_groups):
        if len(ctx.members[g]) < 2:
            continue  # a lone user owns the whole common capacity regardless
        for k in ctx.members[g]:
            def f_of(rk: float):
                cand = best_rho.copy()
                cand[k] = rk
                val, aux = ctx.evaluate(w, p, cand)
                return val, aux, cand

            lo, hi = 0.0, 1.0
            x1 = hi - _GOLDEN * (hi - lo)
            x2 = lo + _GOLDEN * (hi - lo)
            f1, _, _ = f_of(x1)
            f2, _, _ = f_of(x2)
            for _ in range(40):
                if f1 < f2:
                    lo, x1, f1 = x1, x2, f2
                    x2 = lo + _GOLDEN * (hi - lo)
                    f2, _, _ = f_of(x2)
                else:
                    hi, x2, f2 = x2, x1, f1
                    x1 = hi - _GOLDEN * (hi - lo)
                    f1, _, _ = f_of(x1)
            xb = x1 if f1 >= f2 else x2
            fb, auxb, candb = f_of(xb)
            if fb > best_f:
                best_rho, best_f, best_aux = candb, fb, auxb
    return best_rho, best_f, best_aux


# =====================================================================
# Public block operations
# =====================================================================

def _make_context(solution, channels, targets, geom, weights, limits,
                  sigma_n2, sigma_s2, config):
    return _EvalContext(channels, targets, geom, weights, limits, sigma_n2,
                        sigma_s2, solution.grouping, config.qos_penalty)


def beamforming_update(solution: RsNomaSolution, channels, targets,
                       geom: ArrayGeometry, weights: ObjectiveWeights,
                       limits: QosLimits, sigma_n2: float, sigma_s2: float,
                       config: OptimizerConfig) -> RsNomaSolution:
    """One beamformer block: surrogate-gradient ascent with unit-sphere
    projection; the returned solution's true objective is never worse than the
    entry's (fallback to the entry iterate included). Zero inner_steps is the
    identity."""
    ctx = _make_context(solution, channels, targets, geom, weights, limits,
                        sigma_n2, sigma_s2, config)
    w, p, rho = ctx.split_solution(solution)
    f0, aux0 = ctx.evaluate(w, p, rho)
    w2, _, _ = _beam_block(ctx, w, p, rho, f0, aux0, config)
    return ctx.build_solution(w2, p, rho)


def power_update(solution: RsNomaSolution, channels, targets,
                 geom: ArrayGeometry, weights: ObjectiveWeights,
                 limits: QosLimits, sigma_n2: float, sigma_s2: float,
                 config: OptimizerConfig) -> RsNomaSolution:
    """One power block under the scale-then-clip budget projection; same
    monotone fallback contract as beamforming_update."""
    ctx = _make_context(solution, channels, targets, geom, weights, limits,
                        sigma_n2, sigma_s2, config)
    w, p, rho = ctx.split_solution(solution)
    f0, aux0 = ctx.evaluate(w, p, rho)
    p2, _, _ = _power_block(ctx, w, p, rho, f0, aux0, config)
    return ctx.build_solution(w, p2, rho)


def rho_update(solution: RsNomaSolution, channels, targets,
               geom: ArrayGeometry, weights: ObjectiveWeights,
               limits: QosLimits, sigma_n2: float, sigma_s2: float,
               config: OptimizerConfig) -> RsNomaSolution:
    """Golden-section sweep over the common-split coefficients."""
    ctx = _make_context(solution, channels, targets, geom, weights, limits,
                        sigma_n2, sigma_s2, config)
    w, p, rho = ctx.split_solution(solution)
    f0, aux0 = ctx.evaluate(w, p, rho)
    rho2, _, _ = _rho_block(ctx, w, p, rho, f0, aux0, config)
    return ctx.build_solution(w, p, rho2)


def adaptive_weights(weights: ObjectiveWeights, component_values,
                     eta: float = 0.1) -> ObjectiveWeights:
    """Nudge weights toward balanced weighted-component shares.

    Each weight is scaled by exp(eta * (1/4 - share)) where share is the
    component's fraction of the weighted objective; the result is
    renormalized. Balanced shares leave the weights unchanged.
    """
    comp = np.abs(np.asarray(component_values, dtype=float))
    a = weights.as_array()
    contrib = a * comp
    total = contrib.sum()
    if total <= 0.0:
        return weights
    share = contrib / total
    new = a * np.exp(eta * (0.25 - share))
    new /= new.sum()
    return ObjectiveWeights(*new)


# =====================================================================
# Initialization
# =====================================================================

def init_hao_sca(channels, targets, geom: ArrayGeometry, num_groups: int,
                 p_max: float, sigma_n2: float) -> RsNomaSolution:
    """Deterministic warm start.

    Groups come from default_grouping; common beams point along group-mean
    channels, private beams are regularized MMSE directions with loading
    delta = sigma_n2 / p_max, the sensing beam is the RCS-weighted steering
    mixture, powers split the budget uniformly across the G + K + 1 streams,
    and every rho starts at 1/2.
    """
    channels = np.asarray(channels, dtype=complex)
    k_total, m_total = channels.shape
    grouping = default_grouping(channels, num_groups)

    w_common = np.empty((num_groups, m_total), dtype=complex)
    for g in range(num_groups):
        mean = channels[grouping.members(g)].mean(axis=0)
        norm = np.linalg.norm(mean)
        if norm < 1e-300:  # degenerate mean: fall back to the lead member
            mean = channels[grouping.members(g)[0]]
            norm = np.linalg.norm(mean)
        w_common[g] = mean / norm

    delta = sigma_n2 / p_max
    gram = channels.T @ channels.conj()  # sum_k h_k h_k^H, (M, M)
    w_private = np.empty((k_total, m_total), dtype=complex)
    for k in range(k_total):
        a = gram - np.outer(channels[k], channels[k].conj()) \
            + delta * np.eye(m_total)
        wk = np.linalg.solve(a, channels[k])
        w_private[k] = wk / np.linalg.norm(wk)

    if len(targets):
        mix = np.zeros(m_total, dtype=complex)
        for t in targets:
            mix += np.sqrt(t.rcs) * array_response(geom, t.theta, t.phi, t.r)
        w_sensing = mix / np.linalg.norm(mix)
    else:
        w_sensing = np.zeros(m_total, dtype=complex)
        w_sensing[0] = 1.0

    num_streams = num_groups + k_total + 1
    share = p_max / num_streams
    return RsNomaSolution(
        grouping=grouping,
        w_common=w_common, w_private=w_private, w_sensing=w_sensing,
        p_common=np.full(num_groups, share),
        p_private=np.full(k_total, share),
        p_sensing=share,
        rho=np.full(k_total, 0.5),
    )


# =====================================================================
# Full runs
# =====================================================================

def run_hao_sca(channels, targets, geom: ArrayGeometry,
                weights: ObjectiveWeights, limits: QosLimits,
                sigma_n2: float, sigma_s2: float,
                config: OptimizerConfig | None = None, num_groups: int = 1,
                warm_start: RsNomaSolution | None = None,
                conventional_noma: bool = False):
    """Block-coordinate ascent on the penalized composite objective.

    Cycles beamformer, power, and split blocks until the objective change
    drops below config.epsilon or max_iters is exhausted. With
    conventional_noma=True the common powers and rho are frozen at zero
    throughout (the grouped-NOMA baseline).

    Returns:
        (solution, ConvergenceTrace) pair.
    """
    config = config or OptimizerConfig()
    if warm_start is not None:
        sol = warm_start.copy()
        grouping = sol.grouping
    else:
        sol = init_hao_sca(channels, targets, geom, num_groups, limits.p_max,
                           sigma_n2)
        grouping = sol.grouping
    ctx = _EvalContext(channels, targets, geom, weights, limits, sigma_n2,
                       sigma_s2, grouping, config.qos_penalty)
    w, p, rho = ctx.split_solution(sol)
    frozen = None
    if conventional_noma:
        frozen = np.arange(ctx.num_groups)
        p[frozen] = 0.0
        rho[:] = 0.0

    f, aux = ctx.evaluate(w, p, rho)
    objectives = [f]
    violations = [ctx.violation_norm(p, aux)]
    converged = False
    iterations = 0
    for _ in range(config.max_iters):
        iterations += 1
        w, f, aux = _beam_block(ctx, w, p, rho, f, aux, config, frozen)
        p, f, aux = _power_block(ctx, w, p, rho, f, aux, config, frozen)
        if not conventional_noma:
            rho, f, aux = _rho_block(ctx, w, p, rho, f, aux, config)
        if config.adaptive_weights:
            comps = np.array([aux["rate_sum"], aux["util"], aux["ee"], aux["fair"]])
            ctx.weights = adaptive_weights(ctx.weights, comps)
            f, aux = ctx.evaluate(w, p, rho)
        objectives.append(f)
        violations.append(ctx.violation_norm(p, aux))
        if abs(objectives[-1] - objectives[-2]) < config.epsilon:
            converged = True
            break

    rho = np.clip(rho, 0.0, 1.0)
    p = _project_powers(p, limits.p_max)
    solution = ctx.build_solution(w, p, rho)
    trace = ConvergenceTrace(
        objectives=np.array(objectives), violations=np.array(violations),
        iterations_used=iterations, converged=converged,
    )
    return solution, trace


# =====================================================================
# E-WMMSE
# =====================================================================

def e_wmmse_receive_filter(h: np.ndarray, v: np.ndarray, interference: float,
                           sigma_n2: float) -> complex:
    """Scalar MMSE receive filter u = (h^H v)^* / (|h^H v|^2 + I + sigma_n2)."""
    num = np.conj(np.vdot(h, v))
    return complex(num / (np.abs(np.vdot(h, v)) ** 2 + interference + sigma_n2))


def e_wmmse_mse_weight(u: complex, h: np.ndarray, v: np.ndarray) -> float:
    """MSE weight omega = 1 / (1 - u h^H v); real and >= 1 at the MMSE point."""
    mse = 1.0 - np.real(u * np.vdot(h, v))
    if mse <= 0.0:
        raise RuntimeError(f"nonpositive MSE {mse:.3g} in weight update")
    return float(1.0 / mse)


def run_e_wmmse(channels, targets, geom: ArrayGeometry,
                weights: ObjectiveWeights, limits: QosLimits,
                sigma_n2: float, sigma_s2: float,
                config: OptimizerConfig | None = None, num_groups: int = 1,
                lambda_sensing: float = 1.0):
    """Extended WMMSE with SIC-aware MSE stages and a sensing penalty.

    Each iteration: closed-form receive filters and MSE weights per (user,
    stage), per-stream regularized normal equations over the aggregate
    beamformers v = sqrt(p) w, a penalty-gradient step on the sensing beam
    when the echo SINR falls short of the detection threshold, and a budget
    rescale. The trace objective is sum rate minus the sensing penalty.
    """
    config = config or OptimizerConfig()
    sol = init_hao_sca(channels, targets, geom, num_groups, limits.p_max, sigma_n2)
    ctx = _EvalContext(channels, targets, geom, weights, limits, sigma_n2,
                       sigma_s2, sol.grouping, config.qos_penalty)
    h = ctx.h
    g_n, k_n = ctx.num_groups, ctx.k_total
    w, p, rho = ctx.split_solution(sol)
    v_all = np.sqrt(p)[:, None] * w  # aggregates; row -1 is the sensing beam
    delta = sigma_n2 / limits.p_max

    # which streams each MSE stage hears (True = interferes or is desired)
    hear_c = np.ones((k_n, ctx.num_streams), dtype=bool)     # common stages
    hear_p = np.ones((k_n, ctx.num_streams), dtype=bool)     # private stages
    for k in range(k_n):
        hear_p[k, ctx.assign[k]] = False                      # own common gone
        for i in range(k_n):
            if i != k and not ctx.mask[k, i]:
                hear_p[k, g_n + i] = False                    # already stripped

    def trace_objective(v_cur):
        w_dirs = _normalize_rows(v_cur, w)
        p_cur = np.linalg.norm(v_cur, axis=1) ** 2
        _, aux = ctx.evaluate(w_dirs, p_cur, rho)
        short = np.maximum(0.0, ctx.gamma_min - aux["gam_l"])
        return aux["rate_sum"] - lambda_sensing * float(short @ short), aux

    f, aux = trace_objective(v_all)
    objectives = [f]
    violations = [ctx.violation_norm(np.linalg.norm(v_all, axis=1) ** 2, aux)]
    converged = False
    iterations = 0
    for _ in range(config.max_iters):
        iterations += 1
        inner = ctx.hc @ v_all.T                   # (K, S)
        pow_rx = np.abs(inner) ** 2

        u = np.zeros((k_n, 2), dtype=complex)      # columns: common, private
        om = np.ones((k_n, 2))
        for k in range(k_n):
            des_c = ctx.assign[k]
            i_c = float(pow_rx[k, hear_c[k]].sum() - pow_rx[k, des_c])
            u[k, 0] = e_wmmse_receive_filter(h[k], v_all[des_c], i_c, sigma_n2)
            om[k, 0] = e_wmmse_mse_weight(u[k, 0], h[k], v_all[des_c])
            des_p = g_n + k
            i_p = float(pow_rx[k, hear_p[k]].sum() - pow_rx[k, des_p])
            u[k, 1] = e_wmmse_receive_filter(h[k], v_all[des_p], i_p, sigma_n2)
            om[k, 1] = e_wmmse_mse_weight(u[k, 1], h[k], v_all[des_p])

        mu = max(sigma_n2 * float(np.sum(om * np.abs(u) ** 2)) / limits.p_max, delta)
        weights_ku = om * np.abs(u) ** 2           # (K, 2)
        new_v = v_all.copy()
        for j in range(g_n + k_n):
            if j < g_n:
                hearers_c = np.ones(k_n, dtype=bool)
                hearers_p = hear_p[:, j]
                desire = [(k, 0) for k in ctx.members[j]]
            else:
                hearers_c = np.ones(k_n, dtype=bool)
                hearers_p = hear_p[:, j]
                desire = [(j - g_n, 1)]
            coefs = weights_ku[:, 0] * hearers_c + weights_ku[:, 1] * hearers_p
            a_mat = (ctx.h.T * coefs) @ ctx.hc + mu * np.eye(ctx.m_total)
            b = np.zeros(ctx.m_total, dtype=complex)
            for (k, stage) in desire:
                b += om[k, stage] * np.conj(u[k, stage]) * h[k]
            new_v[j] = np.linalg.solve(a_mat, b)

        # sensing beam: penalty-gradient step toward the SINR floor
        if ctx.num_targets and ctx.gamma_min > 0.0:
            va = ctx.steer_c @ new_v.T
            m2 = np.abs(va) ** 2
            beam_sum = m2.sum(axis=1)
            echoes = ctx.echo_power * beam_sum**2
            d_l = echoes.sum() - echoes + sigma_s2
            gam = echoes / d_l
            short = np.maximum(0.0, ctx.gamma_min - gam)
            if short.any():
                coef = 2.0 * lambda_sensing * short * ctx.echo_power / d_l \
                    * 2.0 * beam_sum
                grad_s = (coef * va[:, -1]) @ ctx.steer
                step = 0.1 * np.linalg.norm(new_v[-1]) / max(np.linalg.norm(grad_s),
                                                             1e-300)
                new_v[-1] = new_v[-1] + step * grad_s

        total = float(np.sum(np.abs(new_v) ** 2))
        if total > limits.p_max:
            new_v *= np.sqrt(limits.p_max / total)
        v_all = new_v

        f, aux = trace_objective(v_all)
        objectives.append(f)
        violations.append(ctx.violation_norm(np.linalg.norm(v_all, axis=1) ** 2, aux))
        if abs(objectives[-1] - objectives[-2]) < config.epsilon:
            converged = True
            break

    p_fin = np.linalg.norm(v_all, axis=1) ** 2
    w_fin = _normalize_rows(v_all, w)
    solution = ctx.build_solution(w_fin, _project_powers(p_fin, limits.p_max), rho)
    trace = ConvergenceTrace(
        objectives=np.array(objectives), violations=np.array(violations),
        iterations_used=iterations, converged=converged,
    )
    return solution, trace


# =====================================================================
# Fractional-programming baseline
# =====================================================================

def fp_auxiliary(gammas) -> np.ndarray:
    """Auxiliary variables lambda_k = 1 + gamma_k (exact at the fixed point)."""
    g = np.asarray(gammas, dtype=float)
    if np.any(g < 0.0):
        raise ValueError(f"SINRs must be >= 0, got {g}")
    return 1.0 + g


def run_fp(channels, targets, geom: ArrayGeometry,
           weights: ObjectiveWeights, limits: QosLimits,
           sigma_n2: float, sigma_s2: float,
           config: OptimizerConfig | None = None, num_groups: int = 1):
    """Private-streams-only fractional-programming baseline.

    rho and the common powers stay at zero; auxiliary variables
    lambda_k = 1 + gamma_k are refreshed after every projected-gradient pass
    on the private sum rate. The trace objective is
    sum_k log2(lambda_k) = the private sum rate.
    """
    config = config or OptimizerConfig()
    rate_only = ObjectiveWeights(1.0, 0.0, 0.0, 0.0)
    sol = init_hao_sca(channels, targets, geom, num_groups, limits.p_max, sigma_n2)
    ctx = _EvalContext(channels, targets, geom, rate_only, limits, sigma_n2,
                       sigma_s2, sol.grouping, config.qos_penalty)
    w, p, rho = ctx.split_solution(sol)
    frozen = np.arange(ctx.num_groups)
    p[frozen] = 0.0
    rho[:] = 0.0

    f, aux = ctx.evaluate(w, p, rho)
    lam = fp_auxiliary(aux["gam_p"])
    objectives = [float(np.sum(np.log2(lam)))]
    violations = [ctx.violation_norm(p, aux)]
    converged = False
    iterations = 0
    for _ in range(config.max_iters):
        iterations += 1
        w, f, aux = _beam_block(ctx, w, p, rho, f, aux, config, frozen)
        p, f, aux = _power_block(ctx, w, p, rho, f, aux, config, frozen)
        lam = fp_auxiliary(aux["gam_p"])
        objectives.append(float(np.sum(np.log2(lam))))
        violations.append(ctx.violation_norm(p, aux))
        if abs(objectives[-1] - objectives[-2]) < config.epsilon:
            converged = True
            break

    solution = ctx.build_solution(w, _project_powers(p, limits.p_max), rho)
    trace = ConvergenceTrace(
        objectives=np.array(objectives), violations=np.array(violations),
        iterations_used=iterations, converged=converged,
    )
    return solution, trace
