"""Pointwise identity residuals of a GeometryBundle.

Each residual is max|lhs - rhs| divided by the larger of both sides and the
magnitude of the tensors the two sides were built from, so round-off noise in
a tensor that vanishes analytically still reads as a small number.
"""
import numpy as np

from utils.config import CLASS_TOL

ABS_FLOOR = 1e-10


def _max_abs(a):
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(a))) if a.size else 0.0


def relative_residual(lhs, rhs, *scales):
    diff = _max_abs(np.asarray(lhs) - np.asarray(rhs))
    if diff == 0.0:
        return 0.0
    scale = max(_max_abs(lhs), _max_abs(rhs), *scales)
    return diff / max(scale, ABS_FLOOR)


def is_negligible(bundle, name, tol=CLASS_TOL):
    """Whether tensor ``name`` is zero relative to the tensors it is built from."""
    value = getattr(bundle, name)
    ref = bundle.references.get(name, 0.0)
    return _max_abs(value) <= tol * max(ref, ABS_FLOOR)


def _sym3(T):
    return [T.transpose(1, 0, 2), T.transpose(0, 2, 1)]


def identity_residuals(bundle, tol=CLASS_TOL):
    """Residual per identity name; None where the identity does not apply."""
    y = bundle.y
    ynorm = float(np.linalg.norm(y))
    out = {}

    if bundle.g is not None:
        out["g-symmetric"] = relative_residual(bundle.g, bundle.g.T)
        out["euler"] = relative_residual(y @ bundle.g @ y, bundle.E)
        out["g-inverse"] = relative_residual(bundle.g_inv @ bundle.g, np.eye(bundle.n))

    if bundle.C is not None:
        c_scale = bundle.scale("C")
        out["cartan-symmetric"] = max(relative_residual(bundle.C, P, c_scale) for P in _sym3(bundle.C))
        out["cartan-y"] = relative_residual(bundle.C @ y, 0.0, c_scale * ynorm)

    if bundle.L is not None:
        l_scale = bundle.scale("L")
        out["landsberg-symmetric"] = max(
            relative_residual(bundle.L, P, l_scale) for P in _sym3(bundle.L)
        )
        out["landsberg-y"] = relative_residual(bundle.L @ y, 0.0, l_scale * ynorm)

    if bundle.Gb is not None:
        gb_scale = bundle.scale("Gb")
        out["berwald-symmetric"] = max(
            relative_residual(bundle.Gb, bundle.Gb.transpose(0, 2, 1, 3), gb_scale),
            relative_residual(bundle.Gb, bundle.Gb.transpose(0, 1, 3, 2), gb_scale),
        )

    if bundle.Gamma is not None:
        gamma_scale = bundle.scale("Gamma")
        out["chern-symmetric"] = relative_residual(bundle.Gamma, bundle.Gamma.swapaxes(1, 2))
        out["chern-y"] = relative_residual(
            np.einsum("ijk,j->ik", bundle.Gamma, y), bundle.N, gamma_scale * ynorm
        )

    if bundle.Ps is not None:
        ps_scale = bundle.scale("Ps")
        out["hv-symmetric"] = relative_residual(bundle.Ps, bundle.Ps.swapaxes(1, 2), ps_scale)
        out["hv-y-vertical"] = relative_residual(
            np.einsum("ahjk,k->ahj", bundle.Ps, y), 0.0, ps_scale * ynorm
        )
        if bundle.Lambda is not None:
            out["hv-y-horizontal"] = relative_residual(
                np.einsum("ahjk,j->ahk", bundle.Ps, y),
                bundle.Lambda,
                ps_scale * ynorm,
                bundle.scale("Lambda"),
            )

    if bundle.Lambda is not None and bundle.L is not None:
        # Lambda and L vanish together
        same = is_negligible(bundle, "Lambda", tol) == is_negligible(bundle, "L", tol)
        out["landsberg-lambda"] = 0.0 if same else 1.0
        if bundle.Gb is not None:
            berwald = is_negligible(bundle, "Gb", tol)
            ok = not berwald or (is_negligible(bundle, "L", tol) and is_negligible(bundle, "Lambda", tol))
            out["berwald-reduction"] = 0.0 if ok else 1.0

    if bundle.Rb is not None:
        out["barthel-antisymmetric"] = relative_residual(
            bundle.Rb, -bundle.Rb.swapaxes(1, 2), bundle.scale("Rb")
        )

    if bundle.Rs is not None:
        rs_scale = bundle.scale("Rs")
        Rs = bundle.Rs
        out["chern-h-antisymmetric"] = relative_residual(Rs, -Rs.swapaxes(2, 3), rs_scale)
        out["chern-barthel"] = relative_residual(
            np.einsum("hijk,i->hjk", Rs, y), bundle.Rb, rs_scale * ynorm, bundle.scale("Rb")
        )
        cyclic = Rs + np.einsum("hjki->hijk", Rs) + np.einsum("hkij->hijk", Rs)
        out["bianchi"] = relative_residual(cyclic, 0.0, rs_scale)

        # the pair symmetry R(X,Y,Z,W) = R(Z,W,X,Y) is only claimed where the
        # Barthel curvature vanishes; it also holds for Riemannian points
        if bundle.Rlow is not None and (
            is_negligible(bundle, "Rb", tol) or (bundle.C is not None and is_negligible(bundle, "C", tol))
        ):
            out["pair-symmetry"] = relative_residual(
                bundle.Rlow, np.einsum("kjiw->wijk", bundle.Rlow), bundle.scale("Rlow")
            )
        else:
            out["pair-symmetry"] = None

    return out
