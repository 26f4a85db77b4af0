"""Charging power, fluctuation moments, and the covariance-corrected power bound.

For a full state rho, a battery operator F and an interaction V, the
instantaneous charging power is

    P = -i Tr([rho, F (x) 1] V),

which is real for Hermitian inputs. Writing dF = F - <F>_W and dV = V - <V>,
the squared power decomposes through the explicit positive root of rho as

    P^2 = |Tr(sr dF dV sr)|^2 + |Tr(sr dV dF sr)|^2 - 2 Re[(Tr(rho dF dV))^2],

with sr = sqrt(rho), and is bounded by

    P^2 <= 2 (var_F * var_V - Re[Cov(F,V)^2]).

The covariance Cov(F,V) = <(F (x) 1) V> - <F>_W <V> is kept complex and
unsymmetrized; the two sandwich traces above are complex conjugates of each
other, which is exactly what the Re[Cov^2] term records. ``verify_instance``
recomputes every link of this chain and raises if any of them fails its
tolerance, so a clean report certifies the algebra numerically.
"""

from dataclasses import dataclass, asdict

import numpy as np

from .operators import (
    DensityMatrix,
    DimensionMismatchError,
    HermitianOperator,
    NumericalIntegrityError,
    TensorStructure,
    commutator,
    embed_battery_op,
    expectation,
    matrix_sqrt,
    partial_trace_to_battery,
)

VAR_CLAMP_TOL = 1e-10


@dataclass(frozen=True)
class MomentSet:
    """First and second moments of (F, V): means, variances, complex covariance."""

    mean_f: float
    mean_v: float
    var_f: float
    var_v: float
    cov: complex

    def __post_init__(self):
        for name in ("var_f", "var_v"):
            value = getattr(self, name)
            if value < -VAR_CLAMP_TOL:
                raise NumericalIntegrityError(f"{name} = {value!r} below -{VAR_CLAMP_TOL}")
            if value < 0.0:
                object.__setattr__(self, name, 0.0)
        product = self.var_f * self.var_v
        if product < abs(self.cov) ** 2 - 1e-9 * (1.0 + product):
            raise NumericalIntegrityError(
                "covariance inequality violated: "
                f"var_f*var_v = {product!r} < |cov|^2 = {abs(self.cov) ** 2!r}"
            )

    def to_dict(self) -> dict:
        return {
            "mean_f": self.mean_f,
            "mean_v": self.mean_v,
            "var_f": self.var_f,
            "var_v": self.var_v,
            "cov": {"re": self.cov.real, "im": self.cov.imag},
        }


@dataclass(frozen=True)
class PowerBoundReport:
    """Everything ``verify_instance`` establishes about one (rho, F, V) instance."""

    power: float
    power_sq: float
    term_fv: float
    term_vf: float
    term_cross: float
    corrected_bound: float
    loose_bound: float
    slack: float
    saturation_ratio: float

    def __post_init__(self):
        if abs(self.power_sq - self.power**2) > 1e-10 * (1.0 + self.power_sq):
            raise NumericalIntegrityError("power_sq is not the square of power")
        if self.slack < -1e-9 * (1.0 + self.corrected_bound):
            raise NumericalIntegrityError(
                f"negative slack {self.slack!r} against bound {self.corrected_bound!r}"
            )
        if not (0.0 <= self.saturation_ratio <= 1.0 + 1e-9):
            raise NumericalIntegrityError(f"saturation ratio {self.saturation_ratio!r} outside [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


def delta_operator(a: HermitianOperator, mean: float) -> HermitianOperator:
    """Shift an operator by its mean: A - mean * identity."""
    return HermitianOperator(a.mat - mean * np.eye(a.dim, dtype=complex))


def _check_dims(rho: DensityMatrix, f: HermitianOperator, v: HermitianOperator, s: TensorStructure):
    if f.dim != s.d_w:
        raise DimensionMismatchError(f"battery operator dim {f.dim} != d_w {s.d_w}")
    if rho.dim != s.dim or v.dim != s.dim:
        raise DimensionMismatchError(
            f"state/interaction dims ({rho.dim}, {v.dim}) != structure dim {s.dim}"
        )


def compute_moments(
    rho: DensityMatrix, f: HermitianOperator, v: HermitianOperator, s: TensorStructure
) -> MomentSet:
    """Means, variances and the complex covariance of (F, V) in the given state.

    <F> and var_F are taken in the reduced battery state; <V>, var_V and the
    covariance in the full state. The covariance is deliberately *not*
    symmetrized.
    """
    _check_dims(rho, f, v, s)
    rho_w = partial_trace_to_battery(rho, s)
    mean_f = expectation(rho_w, f)
    mean_f2 = expectation(rho_w, HermitianOperator(f.mat @ f.mat))
    mean_v = expectation(rho, v)
    mean_v2 = expectation(rho, HermitianOperator(v.mat @ v.mat))
    f_emb = embed_battery_op(f, s)
    cov = complex(np.einsum("ij,jk,ki->", rho.mat, f_emb.mat, v.mat)) - mean_f * mean_v
    return MomentSet(
        mean_f=mean_f,
        mean_v=mean_v,
        var_f=mean_f2 - mean_f**2,
        var_v=mean_v2 - mean_v**2,
        cov=cov,
    )


def charging_power(
    rho: DensityMatrix, f: HermitianOperator, v: HermitianOperator, s: TensorStructure
) -> float:
    """P = -i Tr([rho, F (x) 1] V), asserted real to 1e-10."""
    _check_dims(rho, f, v, s)
    f_emb = embed_battery_op(f, s)
    lhs = rho.mat @ f_emb.mat - f_emb.mat @ rho.mat
    raw = -1j * np.einsum("ij,ji->", lhs, v.mat)
    if abs(raw.imag) > 1e-10 * (1.0 + abs(raw.real)):
        raise NumericalIntegrityError(f"charging power has imaginary part {raw.imag:.3e}")
    return float(raw.real)


def decomposition_terms(
    rho: DensityMatrix, f: HermitianOperator, v: HermitianOperator, s: TensorStructure
) -> tuple[float, float, float]:
    """The three terms of the square-root decomposition of P^2.

    Returns (|Tr(sr dF dV sr)|^2, |Tr(sr dV dF sr)|^2, 2 Re[(Tr(rho dF dV))^2])
    with sr = sqrt(rho) computed explicitly by spectral decomposition; the
    cyclic-trace shortcut is deliberately not taken.
    """
    _check_dims(rho, f, v, s)
    rho_w = partial_trace_to_battery(rho, s)
    mean_f = expectation(rho_w, f)
    mean_v = expectation(rho, v)
    df = delta_operator(embed_battery_op(f, s), mean_f)
    dv = delta_operator(v, mean_v)
    sr = matrix_sqrt(rho).mat
    t_fv = np.trace(sr @ df.mat @ dv.mat @ sr)
    t_vf = np.trace(sr @ dv.mat @ df.mat @ sr)
    z = np.einsum("ij,jk,ki->", rho.mat, df.mat, dv.mat)
    return float(abs(t_fv) ** 2), float(abs(t_vf) ** 2), float(2.0 * (z**2).real)


def corrected_bound(m: MomentSet) -> float:
    """Upper bound on P^2: 2 (var_F * var_V - Re[cov^2])."""
    return 2.0 * (m.var_f * m.var_v - (m.cov**2).real)


def loose_bound(m: MomentSet) -> float:
    """The weaker comparison bound 4 * var_F * var_V (never below the corrected one)."""
    return 4.0 * m.var_f * m.var_v


def verify_instance(
    rho: DensityMatrix, f: HermitianOperator, v: HermitianOperator, s: TensorStructure
) -> PowerBoundReport:
    """Full verification of one instance: power, moments, decomposition, bounds.

    Raises NumericalIntegrityError naming the violated identity if any link of
    the chain fails; a returned report means every check passed.
    """
    m = compute_moments(rho, f, v, s)
    power = charging_power(rho, f, v, s)

    # same power through the shifted-commutator route
    df = delta_operator(embed_battery_op(f, s), m.mean_f)
    dv = delta_operator(v, m.mean_v)
    raw = -1j * np.einsum("ij,ji->", rho.mat, commutator(df, dv))
    power_delta = float(raw.real)
    if abs(power - power_delta) > 1e-10 * (1.0 + abs(power)):
        raise NumericalIntegrityError(
            f"commutator-shift power identity violated: {power!r} vs {power_delta!r}"
        )

    power_sq = power * power
    term_fv, term_vf, term_cross = decomposition_terms(rho, f, v, s)
    total = term_fv + term_vf - term_cross
    if abs(total - power_sq) > 1e-9 * (1.0 + max(abs(total), power_sq)):
        raise NumericalIntegrityError(
            f"square-root decomposition identity violated: {total!r} vs power^2 {power_sq!r}"
        )
    if abs(term_fv - term_vf) > 1e-9 * (1.0 + max(term_fv, term_vf)):
        raise NumericalIntegrityError(
            f"conjugate-pair terms differ: {term_fv!r} vs {term_vf!r}"
        )
    if abs(power - 2.0 * m.cov.imag) > 1e-9 * (1.0 + abs(power)):
        raise NumericalIntegrityError(
            f"power vs 2 Im(cov) identity violated: {power!r} vs {2.0 * m.cov.imag!r}"
        )

    bound = corrected_bound(m)
    if bound < -1e-9:
        raise NumericalIntegrityError(f"corrected bound is negative: {bound!r}")
    lo = loose_bound(m)
    if lo < bound - 1e-9 * (1.0 + abs(bound)):
        raise NumericalIntegrityError(f"loose bound {lo!r} below corrected bound {bound!r}")
    if power_sq > bound + 1e-9 * (1.0 + bound):
        raise NumericalIntegrityError(
            f"power bound violated: power^2 = {power_sq!r} > bound = {bound!r}"
        )
    ratio = 0.0 if bound <= 1e-14 else min(power_sq / bound, 1.0 + 1e-9)
    return PowerBoundReport(
        power=power,
        power_sq=power_sq,
        term_fv=term_fv,
        term_vf=term_vf,
        term_cross=term_cross,
        corrected_bound=bound,
        loose_bound=lo,
        slack=bound - power_sq,
        saturation_ratio=ratio,
    )
