import numpy as np
import pytest
from scipy.linalg import subspace_angles

from semicalib.data import InputError
from semicalib.ppca import (PpcaModel, fit_ppca_missing, load_ppca, ppca_reconstruct, save_ppca)


def factor_data(n, p, J, sigma, seed):
    rng = np.random.default_rng(seed)
    U = rng.normal(size=(n, J)) * np.linspace(3, 1, J)
    K = rng.normal(size=(p, J))
    return U @ K.T + sigma * rng.normal(size=(n, p))


@pytest.fixture(scope="module")
def missing_fit():
    rng = np.random.default_rng(7)
    H = factor_data(200, 400, 5, 0.1, seed=1)
    mask = rng.uniform(size=H.shape) > 0.3
    held = mask & (rng.uniform(size=H.shape) < 0.1)
    train = mask & ~held
    return H, train, held, fit_ppca_missing(np.where(train, H, 0.0), train, 5)


@pytest.mark.parametrize("J", [1, 3, 5])
def test_complete_data_matches_svd(J):
    H = factor_data(200, 400, 5, 0.1, seed=J)
    m = fit_ppca_missing(H, np.ones_like(H, dtype=bool), J)
    V = np.linalg.svd(H, full_matrices=False)[2][:J].T
    assert np.max(subspace_angles(m.Ku, V)) < 1e-6
    svd_err = np.linalg.norm(H - H @ V @ V.T)
    assert np.linalg.norm(H - m.reconstruction()) == pytest.approx(svd_err, rel=1e-8)


def test_held_out_rmse(missing_fit):
    H, train, held, m = missing_fit
    rmse = np.sqrt(np.mean((m.reconstruction()[held] - H[held]) ** 2))
    assert rmse < 3 * 0.1


def test_noise_estimate(missing_fit):
    assert missing_fit[3].sigma_e2 == pytest.approx(0.01, rel=0.2)


def test_trace_monotone(missing_fit):
    tr = missing_fit[3].loglik_trace
    assert np.all(np.diff(tr) >= 0)


def test_rank_one_completion():
    u = np.array([1.0, 2.0, -1.5, 0.7])
    k = np.array([0.3, -1.2, 2.0, 0.8, 1.1])
    H = np.outer(u, k)
    mask = np.ones_like(H, dtype=bool)
    mask[2, 3] = False
    m = fit_ppca_missing(np.where(mask, H, 0.0), mask, 1, max_iter=5000, tol=1e-14)
    assert m.reconstruction()[2, 3] == pytest.approx(H[2, 3], rel=1e-6)


def test_reconstruct_rules(rng):
    mask = rng.uniform(size=(3, 4)) < 0.7
    mask[:, 0] = True
    u = rng.normal(size=(3, 1))
    k = rng.normal(size=(4, 1))
    m = PpcaModel(Ku=k, U=u, sigma_e2=1.0, mask=mask, loglik_trace=np.zeros(1))
    for i in range(3):
        out = ppca_reconstruct(m, i)
        np.testing.assert_array_equal(np.isnan(out), ~mask[i])
        np.testing.assert_allclose(out[mask[i]], (u[i, 0] * k[:, 0])[mask[i]], rtol=1e-15)
    zero = PpcaModel(Ku=k, U=np.zeros((3, 1)), sigma_e2=1.0, mask=mask, loglik_trace=np.zeros(1))
    assert np.all(ppca_reconstruct(zero, 1)[mask[1]] == 0)


def test_reconstruct_matches_product(missing_fit):
    _, train, _, m = missing_fit
    for i in (0, 17, 199):
        naive = np.array([sum(m.U[i, l] * m.Ku[j, l] for l in range(m.J_u))
                          for j in range(m.Ku.shape[0])])
        np.testing.assert_allclose(ppca_reconstruct(m, i)[train[i]], naive[train[i]], rtol=1e-12,
                                   atol=1e-12)


def test_scaling_equivariance():
    rng = np.random.default_rng(3)
    H = factor_data(40, 30, 2, 0.2, seed=9)
    mask = rng.uniform(size=H.shape) > 0.2
    # run both to convergence; the relative stopping rule is not scale free
    a = fit_ppca_missing(np.where(mask, H, 0), mask, 2, max_iter=20000, tol=1e-15)
    b = fit_ppca_missing(np.where(mask, 3.0 * H, 0), mask, 2, max_iter=20000, tol=1e-15)
    np.testing.assert_allclose(b.reconstruction(), 3.0 * a.reconstruction(), rtol=1e-7, atol=1e-8)
    assert b.sigma_e2 == pytest.approx(9.0 * a.sigma_e2, rel=1e-7)


def test_validation_errors():
    H = np.ones((4, 5))
    mask = np.ones((4, 5), dtype=bool)
    bad = mask.copy()
    bad[1] = False
    with pytest.raises(InputError):
        fit_ppca_missing(H, bad, 1)
    bad = mask.copy()
    bad[:, 2] = False
    with pytest.raises(InputError):
        fit_ppca_missing(H, bad, 1)
    with pytest.raises(InputError):
        fit_ppca_missing(H, mask, 4)


def test_serialization(tmp_path, missing_fit):
    _, train, _, m = missing_fit
    save_ppca(tmp_path / "ppca.txt", m)
    head = (tmp_path / "ppca.txt").read_text().split("\n")[0].split()
    assert head[:3] == ["400", "200", "5"] and float(head[3]) == m.sigma_e2
    m2 = load_ppca(tmp_path / "ppca.txt", mask=train)
    np.testing.assert_array_equal(m2.Ku, m.Ku)
    np.testing.assert_array_equal(m2.U, m.U)
