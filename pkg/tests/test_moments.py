import numpy as np
import pytest

from qbattery.moments import (
    MomentSet,
    PowerBoundReport,
    charging_power,
    compute_moments,
    corrected_bound,
    decomposition_terms,
    delta_operator,
    loose_bound,
    verify_instance,
)
from qbattery.operators import (
    DensityMatrix,
    HermitianOperator,
    NumericalIntegrityError,
    TensorStructure,
    embed_battery_op,
    expectation,
)

SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]])

QUBIT = TensorStructure.from_dims([2, 1, 1, 1])


def oracle_quantities(rho, f, v):
    """All derived quantities by direct dense arithmetic, no package calls.

    Battery-only layout (no environment), so reduced and full states agree.
    """
    mean_f = np.trace(rho @ f).real
    mean_v = np.trace(rho @ v).real
    var_f = np.trace(rho @ f @ f).real - mean_f**2
    var_v = np.trace(rho @ v @ v).real - mean_v**2
    cov = np.trace(rho @ f @ v) - mean_f * mean_v
    power = (-1j * np.trace((rho @ f - f @ rho) @ v)).real
    bound = 2.0 * (var_f * var_v - (cov**2).real)
    return mean_f, mean_v, var_f, var_v, complex(cov), float(power), float(bound)


# ---------------------------------------------------------- frozen oracles

def test_saturating_qubit_instance():
    # rho = (I + sigma_y)/2, F = sigma_z, V = sigma_x
    rho_m = (np.eye(2) + SY) / 2
    ora = oracle_quantities(rho_m, SZ, SX)
    assert ora[5] == pytest.approx(2.0, abs=1e-12)   # power
    assert ora[6] == pytest.approx(4.0, abs=1e-12)   # bound
    assert ora[4] == pytest.approx(1j, abs=1e-12)    # cov

    rho = DensityMatrix(rho_m)
    f, v = HermitianOperator(SZ), HermitianOperator(SX)
    rep = verify_instance(rho, f, v, QUBIT)
    assert rep.power == pytest.approx(2.0, abs=1e-9)
    assert rep.power_sq == pytest.approx(4.0, abs=1e-9)
    assert rep.corrected_bound == pytest.approx(4.0, abs=1e-9)
    assert rep.saturation_ratio == pytest.approx(1.0, abs=1e-9)
    assert rep.term_fv == pytest.approx(1.0, abs=1e-9)
    assert rep.term_vf == pytest.approx(1.0, abs=1e-9)
    assert rep.term_cross == pytest.approx(-2.0, abs=1e-9)
    assert rep.loose_bound == pytest.approx(4.0, abs=1e-9)


def test_real_covariance_zero_power_instance():
    # rho = (I + sigma_z/2)/2 = diag(0.75, 0.25), F = sigma_z, V = sigma_z + sigma_x
    rho_m = np.diag([0.75, 0.25]).astype(complex)
    v_m = SZ + SX
    ora = oracle_quantities(rho_m, SZ, v_m)
    assert ora[5] == pytest.approx(0.0, abs=1e-15)
    assert ora[2] == pytest.approx(0.75, abs=1e-15)
    assert ora[4] == pytest.approx(0.75, abs=1e-15)
    assert ora[6] == pytest.approx(1.5, abs=1e-15)

    rep = verify_instance(DensityMatrix(rho_m), HermitianOperator(SZ), HermitianOperator(v_m), QUBIT)
    m = compute_moments(DensityMatrix(rho_m), HermitianOperator(SZ), HermitianOperator(v_m), QUBIT)
    assert rep.power == pytest.approx(0.0, abs=1e-12)
    assert m.var_f == pytest.approx(0.75, abs=1e-12)
    assert m.var_v == pytest.approx(1.75, abs=1e-12)
    assert m.cov == pytest.approx(0.75 + 0j, abs=1e-12)
    assert rep.corrected_bound == pytest.approx(1.5, abs=1e-12)
    assert rep.loose_bound == pytest.approx(5.25, abs=1e-12)
    assert rep.slack == pytest.approx(1.5, abs=1e-12)
    assert rep.saturation_ratio == 0.0


def test_eigenstate_instance_all_zero():
    # battery in an F eigenstate tensored with anything: no variance, no covariance
    s = TensorStructure.from_dims([2, 2, 1, 1])
    ket = np.zeros(4, dtype=complex)
    ket[0] = 1.0 / np.sqrt(2)
    ket[1] = 1.0j / np.sqrt(2)  # |0>_W x (|0> + i|1>)/sqrt(2)
    rho = DensityMatrix.from_ket(ket)
    f = HermitianOperator(SZ)
    rng = np.random.default_rng(5)
    m4 = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    v = HermitianOperator((m4 + m4.conj().T) / 2)
    rep = verify_instance(rho, f, v, s)
    m = compute_moments(rho, f, v, s)
    assert abs(rep.power) <= 1e-12
    assert m.var_f <= 1e-12
    assert abs(m.cov) <= 1e-12
    assert abs(rep.corrected_bound) <= 1e-12
    assert rep.saturation_ratio == 0.0


# ---------------------------------------------------------- random sweeps

STRUCTURES = [(2, 1, 1, 1), (2, 2, 1, 1), (2, 2, 2, 1), (3, 2, 1, 1)]


def random_instance(s, rng):
    d = s.dim
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    w = g @ g.conj().T
    rho = DensityMatrix(w / w.trace().real)
    mf = rng.standard_normal((s.d_w, s.d_w)) + 1j * rng.standard_normal((s.d_w, s.d_w))
    f = HermitianOperator((mf + mf.conj().T) / 2)
    mv = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    v = HermitianOperator((mv + mv.conj().T) / 2)
    return rho, f, v


@pytest.mark.parametrize("dims", STRUCTURES)
def test_moments_match_dense_oracle(dims):
    s = TensorStructure.from_dims(list(dims))
    rng = np.random.default_rng(sum(dims))
    for _ in range(25):
        rho, f, v = random_instance(s, rng)
        m = compute_moments(rho, f, v, s)
        # raw dense recomputation with the embedded battery operator
        f_emb = np.kron(f.mat, np.eye(s.env_dim))
        mean_f = np.trace(rho.mat @ f_emb).real
        var_f = np.trace(rho.mat @ f_emb @ f_emb).real - mean_f**2
        mean_v = np.trace(rho.mat @ v.mat).real
        var_v = np.trace(rho.mat @ v.mat @ v.mat).real - mean_v**2
        cov = np.trace(rho.mat @ f_emb @ v.mat) - mean_f * mean_v
        assert m.mean_f == pytest.approx(mean_f, abs=1e-10)
        assert m.mean_v == pytest.approx(mean_v, abs=1e-10)
        assert m.var_f == pytest.approx(var_f, abs=1e-9)
        assert m.var_v == pytest.approx(var_v, abs=1e-9)
        assert m.cov == pytest.approx(complex(cov), abs=1e-9)


@pytest.mark.parametrize("dims", STRUCTURES)
def test_identity_chain_random(dims):
    s = TensorStructure.from_dims(list(dims))
    rng = np.random.default_rng(100 + sum(dims))
    for _ in range(25):
        rho, f, v = random_instance(s, rng)
        m = compute_moments(rho, f, v, s)
        p = charging_power(rho, f, v, s)
        rep = verify_instance(rho, f, v, s)

        assert abs(p - 2.0 * m.cov.imag) <= 1e-9 * (1 + abs(p))
        t_fv, t_vf, t_cross = decomposition_terms(rho, f, v, s)
        assert abs((t_fv + t_vf - t_cross) - p * p) <= 1e-9 * (1 + p * p)
        assert abs(t_fv - t_vf) <= 1e-9 * (1 + max(t_fv, t_vf))
        assert m.var_f * m.var_v >= abs(m.cov) ** 2 - 1e-9 * (1 + m.var_f * m.var_v)
        assert rep.corrected_bound >= -1e-9
        assert rep.loose_bound >= rep.corrected_bound - 1e-9 * (1 + abs(rep.corrected_bound))
        assert p * p <= rep.corrected_bound + 1e-9 * (1 + rep.corrected_bound)
        assert rep.slack == pytest.approx(rep.corrected_bound - rep.power_sq, abs=1e-12)


def test_power_formula_against_commutator_trace():
    s = TensorStructure.from_dims([2, 2, 1, 1])
    rng = np.random.default_rng(77)
    for _ in range(20):
        rho, f, v = random_instance(s, rng)
        p = charging_power(rho, f, v, s)
        f_emb = np.kron(f.mat, np.eye(s.env_dim))
        comm = rho.mat @ f_emb - f_emb @ rho.mat
        raw = -1j * np.trace(comm @ v.mat)
        assert abs(raw.imag) <= 1e-10 * (1 + abs(raw.real))
        assert p == pytest.approx(raw.real, abs=1e-10)


def test_delta_operator_centers_mean():
    rho = DensityMatrix(np.diag([0.2, 0.3, 0.5]).astype(complex))
    rng = np.random.default_rng(3)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    op = HermitianOperator((a + a.conj().T) / 2)
    mean = expectation(rho, op)
    shifted = delta_operator(op, mean)
    assert abs(expectation(rho, shifted)) <= 1e-12


def test_bounds_are_simple_functions_of_moments():
    m = MomentSet(mean_f=0.0, mean_v=0.0, var_f=0.75, var_v=1.75, cov=0.75 + 0j)
    assert corrected_bound(m) == pytest.approx(1.5, abs=1e-15)
    assert loose_bound(m) == pytest.approx(5.25, abs=1e-15)


# ---------------------------------------------------------- validation

def test_momentset_clamps_tiny_negative_variance():
    m = MomentSet(mean_f=0.0, mean_v=0.0, var_f=-5e-11, var_v=1.0, cov=0j)
    assert m.var_f == 0.0


def test_momentset_rejects_negative_variance():
    with pytest.raises(NumericalIntegrityError):
        MomentSet(mean_f=0.0, mean_v=0.0, var_f=-1e-6, var_v=1.0, cov=0j)


def test_momentset_rejects_covariance_inequality_breach():
    with pytest.raises(NumericalIntegrityError):
        MomentSet(mean_f=0.0, mean_v=0.0, var_f=0.1, var_v=0.1, cov=1.0 + 0j)


def test_report_rejects_inconsistent_square():
    with pytest.raises(NumericalIntegrityError):
        PowerBoundReport(
            power=1.0, power_sq=2.0, term_fv=1.0, term_vf=1.0, term_cross=0.0,
            corrected_bound=3.0, loose_bound=4.0, slack=1.0, saturation_ratio=0.5,
        )


def test_report_rejects_negative_slack():
    with pytest.raises(NumericalIntegrityError):
        PowerBoundReport(
            power=2.0, power_sq=4.0, term_fv=2.0, term_vf=2.0, term_cross=0.0,
            corrected_bound=3.0, loose_bound=5.0, slack=-1.0, saturation_ratio=1.0,
        )


def test_report_rejects_out_of_range_ratio():
    with pytest.raises(NumericalIntegrityError):
        PowerBoundReport(
            power=1.0, power_sq=1.0, term_fv=0.5, term_vf=0.5, term_cross=0.0,
            corrected_bound=2.0, loose_bound=3.0, slack=1.0, saturation_ratio=1.5,
        )


def test_report_to_dict_is_json_ready():
    import json

    rep = verify_instance(
        DensityMatrix((np.eye(2) + SY) / 2), HermitianOperator(SZ), HermitianOperator(SX), QUBIT
    )
    doc = rep.to_dict()
    json.dumps(doc)  # must not raise
    assert set(doc) == {
        "power", "power_sq", "term_fv", "term_vf", "term_cross",
        "corrected_bound", "loose_bound", "slack", "saturation_ratio",
    }


# ---------------------------------------------------------- more properties

def test_shift_invariance():
    # F -> F + cI and V -> cV' shifts leave power, variances, cov, bounds alone
    s = TensorStructure.from_dims([2, 2, 1, 1])
    rng = np.random.default_rng(11)
    for _ in range(10):
        rho, f, v = random_instance(s, rng)
        c = float(rng.standard_normal())
        f_shift = HermitianOperator(f.mat + c * np.eye(2))
        v_shift = HermitianOperator(v.mat + c * np.eye(4))
        base_m = compute_moments(rho, f, v, s)
        base_p = charging_power(rho, f, v, s)
        for f2, v2 in [(f_shift, v), (f, v_shift), (f_shift, v_shift)]:
            m = compute_moments(rho, f2, v2, s)
            p = charging_power(rho, f2, v2, s)
            assert p == pytest.approx(base_p, abs=1e-9)
            assert m.var_f == pytest.approx(base_m.var_f, abs=1e-9)
            assert m.var_v == pytest.approx(base_m.var_v, abs=1e-9)
            assert m.cov == pytest.approx(base_m.cov, abs=1e-9)
            assert corrected_bound(m) == pytest.approx(corrected_bound(base_m), abs=1e-9)
            assert loose_bound(m) == pytest.approx(loose_bound(base_m), abs=1e-9)


def test_chain_consistency_tightness():
    # corrected_bound >= 2(|cov|^2 - Re cov^2) and that quantity is 4 Im(cov)^2,
    # so the bound is tight exactly when the variance inequality is
    s = TensorStructure.from_dims([2, 2, 1, 1])
    rng = np.random.default_rng(13)
    for _ in range(50):
        rho, f, v = random_instance(s, rng)
        m = compute_moments(rho, f, v, s)
        inner = 2.0 * (abs(m.cov) ** 2 - (m.cov**2).real)
        assert corrected_bound(m) >= inner - 1e-9
        assert inner == pytest.approx(4.0 * m.cov.imag**2, abs=1e-9 * (1 + inner))


def test_bound_validity_across_total_dimensions():
    # covers total dimensions 2, 4, 8 and 16
    for dims, trials in [((2, 1, 1, 1), 500), ((2, 2, 1, 1), 500), ((2, 2, 2, 1), 500), ((4, 2, 2, 1), 500)]:
        s = TensorStructure.from_dims(list(dims))
        rng = np.random.default_rng(1000 + s.dim)
        for _ in range(trials):
            rho, f, v = random_instance(s, rng)
            rep = verify_instance(rho, f, v, s)
            assert rep.power_sq <= rep.corrected_bound + 1e-9 * (1 + rep.corrected_bound)


def test_commuting_interaction_gives_zero_power():
    # V = F x I commutes with the embedded battery operator: P = 0 and the
    # decomposition collapses, term_cross = term_fv + term_vf
    s = TensorStructure.from_dims([2, 2, 1, 1])
    rng = np.random.default_rng(17)
    mf = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    f = HermitianOperator((mf + mf.conj().T) / 2)
    v = embed_battery_op(f, s)
    rho = DensityMatrix.maximally_mixed(4)
    p = charging_power(rho, f, v, s)
    t_fv, t_vf, t_cross = decomposition_terms(rho, f, v, s)
    assert abs(p) <= 1e-12
    assert t_cross == pytest.approx(t_fv + t_vf, abs=1e-9 * (1 + abs(t_cross)))
    assert (t_fv + t_vf - t_cross) == pytest.approx(0.0, abs=1e-9)
