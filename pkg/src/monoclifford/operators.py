"""Discrete disturbed Dirac operator, Teodorescu transform and ``B = D_ia P T_ia``.

Volume potentials are sums over voxel centres.  Because every target and
source voxel sits on one lattice, kernels are tabulated once per integer
offset and gathered into matrices.

Three quadratures are available for the Teodorescu kernel:

``difference-kernel`` (default)
    The kernel is built as ``(D_h + i avec - i a0) psi`` where ``D_h`` is the
    same centred difference used by :func:`dirac_apply` and ``psi`` is the
    sampled scalar potential ``e^{-i<a,x>} K_a0`` with its cell average at the
    origin.  For ``a = 0`` this makes ``B = G Psi G^T`` exactly, so the
    discrete operator is symmetric positive semidefinite.
``singular-cell-omit``
    Midpoint rule with the exact kernel; the singular voxel is skipped.
``singular-cell-correct``
    Midpoint rule with the exact kernel, except that the singular voxel and
    its neighbours use cell averages of the kernel.
"""

from __future__ import annotations

import json
import weakref
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

from .algebra import apply_left_blade, paravector_blades, vector_blade
from .grid import Field, GridDomain, extend_domain, l2_inner, l2_norm, off_subspace_ratio
from .kernels import (
    KernelParams,
    _box_gauss,
    cell_average_eia,
    cell_average_potential,
    eia_components,
    eia_derivative_components,
    phase_potential,
)

QUADRATURES = ("difference-kernel", "singular-cell-omit", "singular-cell-correct")


class StencilError(ValueError):
    """A voxel has no neighbour along some axis, so no difference quotient exists."""


@dataclass(frozen=True)
class Stencils:
    """Sparse first-derivative matrices of a domain, one per axis."""

    matrices: tuple
    first_order: int  # voxel-axis pairs that fell back to a first-order stencil


_STENCIL_CACHE: "weakref.WeakKeyDictionary[GridDomain, Stencils]" = weakref.WeakKeyDictionary()


def derivative_stencils(domain: GridDomain, at: GridDomain | None = None) -> Stencils:
    """Difference matrices mapping values on ``domain`` to derivatives at the voxels of ``at``.

    Centred where both axis neighbours exist, otherwise second-order one-sided,
    otherwise first-order one-sided (counted in ``first_order``).  ``at``
    defaults to ``domain`` and must be contained in it.
    """
    if at is None or at is domain:
        hit = _STENCIL_CACHE.get(domain)
        if hit is not None:
            return hit
    grid = domain.index_grid
    N = domain.N
    if at is None:
        pos = domain.indices
        rows_all = np.arange(domain.size)
    else:
        pos = at.indices + domain.lattice_offset(at)
        rows_all = domain.locate(at)
        if np.any(rows_all < 0):
            raise ValueError("evaluation voxels must lie inside the field's domain")
    m = len(pos)
    here = rows_all
    out_rows = np.arange(m)

    def look(p):
        inside = np.all((p >= 0) & (p < N), axis=1)
        out = np.full(len(p), -1)
        out[inside] = grid[tuple(p[inside].T)]
        return out

    mats = []
    first = 0
    for j in range(domain.n):
        e = np.zeros(domain.n, dtype=int)
        e[j] = 1
        f1, f2 = look(pos + e), look(pos + 2 * e)
        b1, b2 = look(pos - e), look(pos - 2 * e)
        h = domain.h[j]
        rows, cols, vals = [], [], []

        def add(sel, offsets):
            for target, w in offsets:
                rows.append(out_rows[sel])
                cols.append(target[sel])
                vals.append(np.full(sel.sum(), w / h))

        central = (f1 >= 0) & (b1 >= 0)
        fwd2 = ~central & (f1 >= 0) & (f2 >= 0)
        bwd2 = ~central & ~fwd2 & (b1 >= 0) & (b2 >= 0)
        fwd1 = ~central & ~fwd2 & ~bwd2 & (f1 >= 0)
        bwd1 = ~central & ~fwd2 & ~bwd2 & ~fwd1 & (b1 >= 0)
        lost = ~(central | fwd2 | bwd2 | fwd1 | bwd1)
        if lost.any():
            bad = domain.lo + (pos[np.flatnonzero(lost)[0]] + 0.5) * domain.h
            raise StencilError(f"voxel at {bad} has no neighbour along axis {j + 1}")
        add(central, [(f1, 0.5), (b1, -0.5)])
        add(fwd2, [(here, -1.5), (f1, 2.0), (f2, -0.5)])
        add(bwd2, [(here, 1.5), (b1, -2.0), (b2, 0.5)])
        add(fwd1, [(here, -1.0), (f1, 1.0)])
        add(bwd1, [(here, 1.0), (b1, -1.0)])
        first += int(fwd1.sum() + bwd1.sum())
        mat = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(m, domain.size),
        )
        mats.append(mat)
    st = Stencils(tuple(mats), first)
    if at is None or at is domain:
        _STENCIL_CACHE[domain] = st
    return st


@dataclass(eq=False)
class OperatorContext:
    """Domain, kernel parameters and discretization choices for the operators."""

    domain: GridDomain
    params: KernelParams
    exterior_pad: int = 2
    quadrature: str = "difference-kernel"
    _tables: dict = field(default_factory=dict, init=False, repr=False)
    _matrices: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.params.n != self.domain.n:
            raise ValueError("kernel dimension does not match the domain")
        if self.exterior_pad < 0:
            raise ValueError("exterior_pad must be >= 0")
        if self.quadrature not in QUADRATURES:
            raise ValueError(f"quadrature must be one of {QUADRATURES}")

    @property
    def n(self) -> int:
        return self.domain.n

    @cached_property
    def ext1(self) -> GridDomain:
        """Domain dilated by one layer: every voxel of G gets centred stencils."""
        return extend_domain(self.domain, 1)

    @cached_property
    def ext_collar(self) -> GridDomain:
        """Domain dilated by ``exterior_pad`` layers (G plus the exterior collar)."""
        return extend_domain(self.domain, max(self.exterior_pad, 1))

    @cached_property
    def ext_collar_plus(self) -> GridDomain:
        p = max(self.exterior_pad, 1)
        return extend_domain(self.domain, p + 1, p + 1)

    # -- kernel tables -------------------------------------------------------

    def _table(self, span: int):
        """Kernel coefficients times voxel volume on integer offsets in ``[-span, span]^n``."""
        for s, tab in self._tables.items():
            if s >= span:
                return s, tab
        n = self.n
        h = self.domain.h
        vol = self.domain.voxel_volume
        p = self.params
        L = 2 * span + 1
        offs = np.stack(np.meshgrid(*[np.arange(-span, span + 1)] * n, indexing="ij"), -1)
        offs = offs.reshape(-1, n)
        z = offs * h
        origin = np.all(offs == 0, axis=1)
        scal = np.zeros(len(offs), dtype=complex)
        vec = np.zeros((len(offs), n), dtype=complex)
        if self.quadrature == "difference-kernel":
            # psi on [-span-1, span+1]^n, cell average at the origin
            S = span + 1
            poffs = np.stack(np.meshgrid(*[np.arange(-S, S + 1)] * n, indexing="ij"), -1)
            poffs = poffs.reshape(-1, n)
            pz = poffs * h
            porigin = np.all(poffs == 0, axis=1)
            psi = np.empty(len(poffs), dtype=complex)
            psi[~porigin] = phase_potential(pz[~porigin], p)
            psi[porigin] = cell_average_potential(h, p)
            psi = psi.reshape((2 * S + 1,) * n)
            core = tuple(slice(1, -1) for _ in range(n))
            psi_c = psi[core].reshape(-1)
            scal = -1j * p.a0 * psi_c
            for j in range(n):
                up = tuple(slice(2, None) if k == j else slice(1, -1) for k in range(n))
                dn = tuple(slice(None, -2) if k == j else slice(1, -1) for k in range(n))
                vec[:, j] = (psi[up] - psi[dn]).reshape(-1) / (2 * h[j]) + 1j * p.avec[j] * psi_c
        else:
            scal[~origin], vec[~origin] = eia_components(z[~origin], p)
            if self.quadrature == "singular-cell-correct":
                near = (np.max(np.abs(offs), axis=1) == 1)
                pts, wts = _box_gauss(-h / 2, h / 2, 6)
                wts = wts / vol
                for i in np.flatnonzero(near):
                    s_, v_ = eia_components(z[i] + pts, p)
                    scal[i] = np.sum(wts * s_)
                    vec[i] = wts @ v_
                s0, v0 = cell_average_eia(h, p)
                scal[origin], vec[origin] = s0, v0
        tab = (scal.reshape((L,) * n) * vol, vec.reshape((L,) * n + (n,)) * vol)
        self._tables[span] = tab
        return span, tab

    def kernel_matrices(self, targets: GridDomain):
        """``(Ks, Kv)``: scalar ``(mt, ms)`` and vector ``(n, mt, ms)`` kernel blocks."""
        key = id(targets)
        hit = self._matrices.get(key)
        if hit is not None and hit[0] is targets:
            return hit[1]
        src = self.domain
        tpos = targets.indices + src.lattice_offset(targets)
        offs = tpos[:, None, :] - src.indices[None, :, :]
        span = int(np.abs(offs).max())
        s, (ts, tv) = self._table(span)
        idx = tuple(np.moveaxis(offs + s, -1, 0))
        Ks = ts[idx]
        Kv = np.moveaxis(tv[idx], -1, 0).copy()
        self._matrices[key] = (targets, (Ks, Kv))
        return Ks, Kv

    # -- fast paths for B ------------------------------------------------------

    @cached_property
    def _b_parts(self):
        """Potential map (paravector dofs -> scalar on ext1) and output map back to G."""
        n = self.n
        ext = self.ext1
        Ks, Kv = self.kernel_matrices(ext)
        potential = np.concatenate([Ks] + [-Kv[j] for j in range(n)], axis=1)
        st = derivative_stencils(ext, at=self.domain)
        rows = ext.locate(self.domain)
        R = sparse.csr_matrix(
            (np.ones(len(rows)), (np.arange(len(rows)), rows)), shape=(len(rows), ext.size)
        )
        p = self.params
        blocks = [1j * p.a0 * R] + [st.matrices[j] + 1j * p.avec[j] * R for j in range(n)]
        output = sparse.vstack(blocks).tocsr()
        return potential, output

    @cached_property
    def dense_B(self) -> np.ndarray:
        """Matrix of B on paravector coefficients ordered ``(blade, voxel)``."""
        potential, output = self._b_parts
        return np.asarray(output @ potential)

    @cached_property
    def dense_B_reduced(self) -> np.ndarray:
        """Smallest dense block carrying B's nonzero spectrum.

        For ``a = 0`` B is real and maps vector fields to vector fields while
        annihilating scalars, so the real vector block suffices (the complex
        operator is two copies of it plus zeros).  Otherwise the full complex
        paravector matrix is returned.
        """
        if not self.params.a.is_zero():
            return self.dense_B
        potential, output = self._b_parts
        m = self.domain.size
        block = (output[m:] @ potential[:, m:]).real
        return np.asarray(block)

    def apply_B_paravector(self, coeffs: np.ndarray) -> np.ndarray:
        """B on an ``(m, n+1)`` array of paravector coefficients (fast matrix path)."""
        potential, output = self._b_parts
        flat = np.asarray(coeffs, dtype=complex).T.reshape(-1)
        out = output @ (potential @ flat)
        return out.reshape(self.n + 1, -1).T


def dirac_apply(u: Field, ctx: OperatorContext, at: GridDomain | None = None) -> Field:
    """``D_ia u = sum_j e_j d_j u + i a u`` by finite differences.

    The result lives on ``at`` (a sub-domain of ``u.domain``, default all of it).
    """
    n = u.dim
    if n != ctx.n:
        raise ValueError("field dimension does not match the operator context")
    at = u.domain if at is None else at
    st = derivative_stencils(u.domain, at=at)
    vals = u.values
    local = vals if at is u.domain else vals[u.domain.locate(at)]
    out = np.zeros_like(local)
    p = ctx.params
    for j in range(n):
        dj = st.matrices[j] @ vals
        out += apply_left_blade(n, vector_blade(j + 1), dj)
        if p.avec[j]:
            out += 1j * p.avec[j] * apply_left_blade(n, vector_blade(j + 1), local)
    if p.a0:
        out += 1j * p.a0 * local
    return Field(at, out)


def teodorescu_apply(u: Field, ctx: OperatorContext, targets: GridDomain | None = None) -> Field:
    """``T_ia u(x) = sum_y e_ia(x - y) u(y) |cell|`` at the voxels of ``targets`` (default G)."""
    if not u.domain.same_as(ctx.domain):
        raise ValueError("field must live on the operator domain")
    targets = ctx.domain if targets is None else targets
    Ks, Kv = ctx.kernel_matrices(targets)
    n = ctx.n
    U = u.values
    out = Ks @ U
    for j in range(n):
        out += Kv[j] @ apply_left_blade(n, vector_blade(j + 1), U)
    return Field(targets, out)


def scalar_part_field(u: Field) -> Field:
    v = np.zeros_like(u.values)
    v[:, 0] = u.values[:, 0]
    return Field(u.domain, v)


def singular_B_apply(u: Field, ctx: OperatorContext) -> Field:
    """``B u = D_ia P T_ia u``.

    ``P T_ia u`` is evaluated on G dilated by one layer so that the
    difference quotients at every voxel of G are centred.
    """
    phi = scalar_part_field(teodorescu_apply(u, ctx, targets=ctx.ext1))
    return dirac_apply(phi, ctx, at=ctx.domain)


def apply_B(u: Field, ctx: OperatorContext) -> Field:
    """Same operator as :func:`singular_B_apply`, through the cached matrices.

    B only reads the paravector part of ``u`` and returns a paravector field.
    """
    out = np.zeros_like(u.values)
    out[:, list(paravector_blades(ctx.n))] = ctx.apply_B_paravector(u.paravector_part())
    return Field(u.domain, out)


def pv_derivative_apply(
    u: Field, ctx: OperatorContext, j: int, k: int, free_term: float | None = None
) -> Field:
    """``d/dx_k`` of the ``e_j`` component of ``T_ia u`` for a scalar field ``u``.

    Principal value sum of the differentiated kernel over all voxels but the
    target's own (the cube exclusion is symmetric), plus ``free_term * u(x)``
    when ``j == k``.  The default free term is ``-1/n``; see
    :func:`fit_free_term` for the numerical estimate.
    """
    n = ctx.n
    if not (1 <= j <= n and 1 <= k <= n):
        raise ValueError("j and k must be axis numbers 1..n")
    d = ctx.domain
    offs = d.indices[:, None, :] - d.indices[None, :, :]
    z = offs * d.h
    diag = np.all(offs == 0, axis=-1)
    kern = np.zeros(diag.shape, dtype=complex)
    _, dvec = eia_derivative_components(z[~diag], ctx.params)
    kern[~diag] = dvec[:, j - 1, k - 1]
    s = u.values[:, 0]
    out = kern @ s * d.voxel_volume
    if j == k:
        c = -1.0 / n if free_term is None else free_term
        out = out + c * s
    return Field.from_components(d, {0: out})


def fd_derivative_of_teodorescu(u: Field, ctx: OperatorContext, j: int, k: int) -> Field:
    """Composition path: centred difference along ``k`` of the ``e_j`` component of ``T u``."""
    Tu = teodorescu_apply(scalar_part_field(u), ctx, targets=ctx.ext1)
    st = derivative_stencils(ctx.ext1, at=ctx.domain)
    return Field.from_components(ctx.domain, {0: st.matrices[k - 1] @ Tu.values[:, vector_blade(j)]})


def fit_free_term(u: Field, ctx: OperatorContext, j: int, min_depth: int = 2) -> float:
    """Least-squares free-term constant matching the p.v. path to the composition path.

    Only voxels at least ``min_depth`` cells inside the mask are used.
    """
    fd = fd_derivative_of_teodorescu(u, ctx, j, j).values[:, 0]
    pv = pv_derivative_apply(u, ctx, j, j, free_term=0.0).values[:, 0]
    s = u.values[:, 0]
    sel = ctx.domain.distance_to_boundary() >= min_depth
    num = np.vdot(s[sel], (fd - pv)[sel])
    return float(num.real / np.vdot(s[sel], s[sel]).real)


@dataclass(frozen=True)
class BorelPompeiuResidual:
    interior: float
    exterior: float
    interior_voxels: int
    collar_voxels: int


def borel_pompeiu_residual(u: Field, ctx: OperatorContext, min_depth: int = 2) -> BorelPompeiuResidual:
    """Size of ``D_ia T_ia u - u`` inside G and of ``D_ia T_ia u`` on the exterior collar.

    The interior value is relative to ``||u||`` on voxels at least
    ``min_depth`` cells from the mask boundary; the exterior value is
    ``||D T u||_collar / ||u||_G``.
    """
    norm_u = l2_norm(u)
    if norm_u == 0:
        return BorelPompeiuResidual(0.0, 0.0, 0, 0)
    Tu = teodorescu_apply(u, ctx, targets=ctx.ext_collar_plus)
    DTu = dirac_apply(Tu, ctx, at=ctx.ext_collar)
    inner = DTu.restrict(ctx.domain)
    sel = ctx.domain.distance_to_boundary() >= min_depth
    diff = inner.values[sel] - u.values[sel]
    interior = np.linalg.norm(diff) / np.linalg.norm(u.values[sel])
    collar = ctx.ext_collar
    on_collar = DTu
    outside = collar.locate(ctx.domain)
    keep = np.ones(collar.size, dtype=bool)
    keep[outside] = False
    ext_sq = np.sum(np.abs(on_collar.values[keep]) ** 2) * collar.voxel_volume
    return BorelPompeiuResidual(float(interior), float(np.sqrt(ext_sq) / norm_u), int(sel.sum()), int(keep.sum()))


def dense_singular_values(ctx: OperatorContext) -> np.ndarray:
    return np.linalg.svd(ctx.dense_B_reduced, compute_uv=False)


def symmetrized_eigenvalues(ctx: OperatorContext) -> np.ndarray:
    """Eigenvalues of the Hermitian part of B, i.e. of ``u -> (Bu, u)`` as a quadratic form."""
    M = ctx.dense_B_reduced
    return np.linalg.eigvalsh(0.5 * (M + M.conj().T))


@dataclass(frozen=True)
class NormEstimate:
    value: float
    history: tuple


def operator_norm_estimate(ctx: OperatorContext, iterations: int = 200, seed: int = 0) -> NormEstimate:
    """Power iteration on ``B* B`` (adjoint w.r.t. the L2 product) and the square root of its Rayleigh quotient.

    The voxel weight is uniform, so the L2 adjoint is the conjugate transpose
    of the dense matrix.  The history is nondecreasing.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    M = ctx.dense_B_reduced
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(M.shape[1]).astype(M.dtype)
    if np.iscomplexobj(M):
        x = x + 1j * rng.standard_normal(M.shape[1])
    x /= np.linalg.norm(x)
    MH = M.conj().T.copy()
    history = []
    for _ in range(iterations):
        z = MH @ (M @ x)
        rq = float(np.vdot(x, z).real)
        history.append(np.sqrt(max(rq, 0.0)))
        nz = np.linalg.norm(z)
        if nz == 0:
            break
        x = z / nz
    return NormEstimate(history[-1], tuple(history))


@dataclass(frozen=True)
class PositivityEstimate:
    min_rayleigh: float
    min_eigenvalue: float | None


def random_paravector_field(domain: GridDomain, rng, complex_values: bool = True) -> Field:
    shape = (domain.size, domain.n + 1)
    vals = rng.standard_normal(shape)
    if complex_values:
        vals = vals + 1j * rng.standard_normal(shape)
    return Field.paravector(domain, vals)


def positivity_estimate(ctx: OperatorContext, samples: int = 32, seed: int = 0, exact: bool = True) -> PositivityEstimate:
    """Smallest sampled ``(Bu, u)`` over random unit fields, and the exact minimum of the form."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    lo = np.inf
    for _ in range(samples):
        u = random_paravector_field(ctx.domain, rng)
        u = u * (1.0 / l2_norm(u))
        lo = min(lo, l2_inner(apply_B(u, ctx), u))
    eig = float(symmetrized_eigenvalues(ctx)[0]) if exact else None
    return PositivityEstimate(float(lo), eig)


@dataclass(frozen=True)
class SubspaceReport:
    status: str  # "pass", "fail" or "skipped"
    subspace: str
    off_ratio: float


def subspace_preservation_check(u: Field, ctx: OperatorContext, rtol: float = 1e-10) -> SubspaceReport:
    """Check that B keeps paravector fields paravector (and vector fields vector when a0 = 0)."""
    n = ctx.n
    para = paravector_blades(n)
    vec = para[1:]
    if off_subspace_ratio(u, para) > 0:
        return SubspaceReport("skipped", "none", float("nan"))
    Bu = singular_B_apply(u, ctx)
    if off_subspace_ratio(u, vec) == 0 and ctx.params.a0 == 0:
        ratio = off_subspace_ratio(Bu, vec)
        name = "vector"
    else:
        ratio = off_subspace_ratio(Bu, para)
        name = "paravector"
    return SubspaceReport("pass" if ratio <= rtol else "fail", name, ratio)


def operator_diagnostics(ctx: OperatorContext, iterations: int = 200, seed: int = 0, bump_width: float = 0.3) -> dict:
    """Norm, positivity and Borel-Pompeiu figures under the fixed JSON key names."""
    norm = operator_norm_estimate(ctx, iterations, seed)
    pos = positivity_estimate(ctx, samples=16, seed=seed, exact=False)
    bp = borel_pompeiu_residual(gaussian_bump(ctx.domain, bump_width), ctx)
    return {
        "norm_estimate": norm.value,
        "min_rayleigh": pos.min_rayleigh,
        "bp_interior_residual": bp.interior,
        "bp_exterior_norm": bp.exterior,
        "grid_N": ctx.domain.N,
        "dimension": ctx.n,
        "a0": ctx.params.a0,
        "a_vec": list(ctx.params.a.aj),
    }


def diagnostics_json(diag: dict) -> str:
    return json.dumps(diag, indent=2, sort_keys=False)


def gaussian_bump(domain: GridDomain, width: float = 0.3) -> Field:
    """Scalar Gaussian ``exp(-|x - c|^2 / 2 s^2)`` centred in the box, ``s = width * half-extent``."""
    c = domain.lo + domain.N * domain.h / 2
    s = width * float(np.min(domain.N * domain.h)) / 2
    r2 = np.sum((domain.centers - c) ** 2, axis=1)
    return Field.from_components(domain, {0: np.exp(-r2 / (2 * s * s))})
