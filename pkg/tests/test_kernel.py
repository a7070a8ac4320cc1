import numpy as np
import pytest

from nematiclab import kernel


@pytest.fixture(scope="module")
def torus1():
    return kernel.make_torus(1, 2 * np.pi, 64)


@pytest.fixture(scope="module")
def spec1():
    return kernel.KernelSpec(a=1.0, d=1)


def test_spec_validation():
    with pytest.raises(ValueError):
        kernel.KernelSpec(a=4.0, d=1)
    with pytest.raises(ValueError):
        kernel.KernelSpec(a=1.0, d=3)
    s = kernel.KernelSpec(a=1.0, d=2)
    assert s.mu == pytest.approx(1.0)
    assert s.c0 == pytest.approx(np.pi ** 2 * 0.99)


def test_torus_validation():
    with pytest.raises(ValueError):
        kernel.make_torus(1, 1.0, 48)


def test_khat_range(spec1, torus1):
    kh = kernel.khat(spec1, torus1.xi)
    assert np.all(kh > 0) and np.all(kh <= 1.0)
    assert kh.ravel()[0] == pytest.approx(1.0)


def test_convolution_preserves_mean(spec1, torus1, rng):
    u = rng.standard_normal(torus1.n)
    for eps in (0.1, 0.01):
        cu = kernel.convolve_keps(torus1, spec1, u, eps)
        assert abs(np.mean(cu) - np.mean(u)) < 1e-12
        # contraction in L2
        assert torus1.l2_norm(cu) <= torus1.l2_norm(u) + 1e-12


def test_L_eps_bound(spec1, torus1, rng):
    # multiplier (1 - khat)/eps is between 0 and 2/eps... in fact <= 1/eps
    u = rng.standard_normal(torus1.n)
    eps = 0.05
    lu = kernel.apply_L_eps(torus1, spec1, u, eps)
    uh = np.abs(np.fft.fft(u))
    lh = np.abs(np.fft.fft(lu))
    assert np.all(lh <= (2.0 / eps) * uh + 1e-9)
    assert abs(np.mean(lu)) < 1e-12


def test_L_equals_T_dot_T(spec1, torus1, rng):
    u = rng.standard_normal(torus1.n)
    eps = 0.05
    lu = kernel.apply_L_eps(torus1, spec1, u, eps)
    tv = kernel.apply_T_eps(torus1, spec1, u, eps)
    ttu = np.zeros_like(u, dtype=complex)
    for k in range(1):
        ttu += kernel.apply_T_eps(torus1, spec1, tv[k].real, eps)[k] \
            + 1j * kernel.apply_T_eps(torus1, spec1, tv[k].imag, eps)[k]
    assert np.max(np.abs(ttu.real - lu)) < 1e-12


def test_T_eps_gradient_limit(spec1, torus1):
    x = torus1.x[..., 0]
    u = np.sin(x) + 0.5 * np.cos(2 * x)
    grad = np.gradient(u, torus1.h, edge_order=2)
    grad = np.fft.ifft(np.fft.fft(u) * 2j * np.pi * torus1.xi[..., 0]).real
    target = -1j * np.sqrt(spec1.mu / 2.0) * grad
    errs = []
    for eps in (1e-1, 1e-2, 1e-3):
        tv = kernel.apply_T_eps(torus1, spec1, u, eps)[0]
        errs.append(torus1.l2_norm(tv - target))
    assert errs[0] > errs[1] > errs[2]


def test_energy_form_matches_direct(spec1, rng):
    torus = kernel.make_torus(1, 2 * np.pi, 16)
    Q = rng.standard_normal((16, 3, 3))
    Q = Q + np.transpose(Q, (0, 2, 1))
    tr = np.trace(Q, axis1=1, axis2=2)
    Q -= tr[:, None, None] * np.eye(3) / 3.0
    for eps in (0.1, 0.01):
        e1 = kernel.doubled_energy_form(torus, spec1, Q, eps, 8.0)
        e2 = kernel.doubled_energy_direct(torus, spec1, Q, eps, 8.0)
        assert e1 >= 0
        assert abs(e1 - e2) < 1e-10 * max(1.0, abs(e1))


def test_certify_c0(spec1, torus1):
    val = kernel.certify_c0(torus1, spec1, eps_list=(1.0, 0.1, 0.01))
    assert val >= spec1.c0


def test_tail_mass_decreasing(spec1):
    for d in (1, 2):
        spec = kernel.KernelSpec(a=1.0, d=d)
        tails = [kernel.tail_mass(spec, eps, 0.25)
                 for eps in (1e-1, 1e-2, 1e-3)]
        assert all(t >= 0 for t in tails)
        assert tails[0] / max(tails[1], 1e-300) >= 10
        assert tails[1] / max(tails[2], 1e-300) >= 10


def test_torus_2d_shapes(rng):
    torus = kernel.make_torus(2, 4.0, 8)
    spec = kernel.KernelSpec(a=1.0, d=2)
    u = rng.standard_normal((8, 8, 3, 3))
    out = kernel.convolve_keps(torus, spec, u, 0.1)
    assert out.shape == u.shape
    tv = kernel.apply_T_eps(torus, spec, u[..., 0, 0], 0.1)
    assert tv.shape == (2, 8, 8)
