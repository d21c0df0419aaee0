"""Matrix product state container and state-level operations.

The state is stored in weighted form: three-index site tensors Gamma[m] with
axes (left bond, physical, right bond), separated by per-bond weight vectors
lambda[m].  The full amplitude tensor is the chain contraction
Gamma[0] diag(lambda[0]) Gamma[1] ... Gamma[n-1].  When a bond's flanking
sites are orthonormal in the appropriate sense, its weights equal the Schmidt
coefficients across that cut, and single-site density matrices can be read
off locally.

Conventions fixed here and relied on throughout:

* Contracting two sites absorbs the interior weights; an SVD split absorbs
  both flanking weight vectors into the two-site block first and divides them
  back out of the factors afterwards.  All stored weights exceed the
  truncation floor, so the divisions are safe.
* A trivial split stores all-ones weights on the new bond; rank minimization
  is deferred to the next SVD to touch that bond.
* Orthonormality is tracked per site: ``lortho[m]`` says the left-weighted
  tensor lambda[m-1] Gamma[m] has orthonormal columns, ``rortho[m]`` says
  Gamma[m] lambda[m] has orthonormal rows.  These are properties of the
  stored arrays, updated exactly (never heuristically) by each operation.
* The element accountant tallies live site-tensor scalars: a real scalar
  counts 1 unit, a complex scalar 2, so converting scalar modes doubles the
  tally exactly.  Bond weights (always real) are excluded from the tally.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import sqrt

import numpy as np

from .tensor import DEFAULT_SVD_TOL, svd_truncated, trivial_decompose

LOWER_REGISTER = "R"


class NotCanonicalError(RuntimeError):
    """Local density matrix requested across a bond not known orthonormal."""


class NotSeparableError(RuntimeError):
    """Site removal requested while a flanking bond has dimension > 1."""


class NormalizationError(RuntimeError):
    """Measurement probabilities failed the unit-mass check."""


class StateTooLargeError(RuntimeError):
    """Dense contraction would exceed the configured amplitude cap."""


@dataclass(frozen=True)
class RankProfile:
    """Per-bond Schmidt ranks captured at a named pipeline stage."""

    stage: str
    ranks: tuple[int, ...]
    layout: tuple

    def __len__(self):
        return len(self.ranks)


def _all_ones(v: np.ndarray) -> bool:
    return bool(np.all(v == 1.0))


_checked_unitaries: set[bytes] = set()


def _require_unitary(g: np.ndarray, tol: float = 1e-10) -> None:
    key = g.dtype.str.encode() + str(g.shape).encode() + g.tobytes()
    if key in _checked_unitaries:
        return
    d = g.shape[0]
    if g.shape != (d, d) or not np.allclose(g.conj().T @ g, np.eye(d), atol=tol):
        raise ValueError("gate is not unitary within tolerance")
    if len(_checked_unitaries) > 4096:
        _checked_unitaries.clear()
    _checked_unitaries.add(key)


class MpsState:
    """Open-boundary MPS over qudits of arbitrary physical dimensions."""

    def __init__(self, gammas, lambdas, labels, complex_mode=False):
        self.gammas: list[np.ndarray] = list(gammas)
        self.lambdas: list[np.ndarray] = list(lambdas)
        self.labels: list = list(labels)
        self.complex_mode = bool(complex_mode)
        self.lortho: list[bool] = [False] * len(self.gammas)
        self.rortho: list[bool] = [False] * len(self.gammas)
        self.svd_tol = DEFAULT_SVD_TOL
        self.elements_live = 0
        self.elements_peak = 0
        self._retally()

    # ------------------------------------------------------------------ basics

    @property
    def n_sites(self) -> int:
        return len(self.gammas)

    @property
    def n_bonds(self) -> int:
        return len(self.lambdas)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(g.shape[1] for g in self.gammas)

    @property
    def dtype(self):
        return np.complex128 if self.complex_mode else np.float64

    def bond_dims(self) -> tuple[int, ...]:
        return tuple(lam.size for lam in self.lambdas)

    def position_of(self, label) -> int:
        return self.labels.index(label)

    def copy(self) -> "MpsState":
        out = MpsState(
            [g.copy() for g in self.gammas],
            [l.copy() for l in self.lambdas],
            list(self.labels),
            self.complex_mode,
        )
        out.lortho = list(self.lortho)
        out.rortho = list(self.rortho)
        out.svd_tol = self.svd_tol
        out.elements_peak = out.elements_live
        return out

    def _unit(self) -> int:
        return 2 if self.complex_mode else 1

    def _retally(self) -> None:
        self.elements_live = self._unit() * sum(g.size for g in self.gammas)
        if self.elements_live > self.elements_peak:
            self.elements_peak = self.elements_live

    def reset_peak(self) -> None:
        self.elements_peak = self.elements_live

    def check_consistent(self) -> None:
        """Structural validation used by tests."""
        assert len(self.labels) == self.n_sites
        assert self.n_bonds == self.n_sites - 1
        assert self.gammas[0].shape[0] == 1 and self.gammas[-1].shape[2] == 1
        for m, lam in enumerate(self.lambdas):
            assert self.gammas[m].shape[2] == lam.size == self.gammas[m + 1].shape[0]
            assert np.all(lam > 0)

    # ------------------------------------------------------------- construction

    @classmethod
    def product_state(cls, dims, values, labels=None, complex_mode=False):
        """All bonds dimension 1; each site a basis unit vector."""
        dtype = np.complex128 if complex_mode else np.float64
        gammas = []
        for d, v in zip(dims, values):
            if not 0 <= v < d:
                raise ValueError(f"basis value {v} out of range for dimension {d}")
            g = np.zeros((1, d, 1), dtype=dtype)
            g[0, v, 0] = 1.0
            gammas.append(g)
        lambdas = [np.ones(1) for _ in range(len(gammas) - 1)]
        if labels is None:
            labels = list(range(len(gammas)))
        state = cls(gammas, lambdas, labels, complex_mode)
        state.lortho = [True] * state.n_sites
        state.rortho = [True] * state.n_sites
        return state

    # ------------------------------------------------------------- contraction

    def norm(self) -> float:
        """Full-contraction 2-norm, via the transfer chain (never dense)."""
        env = np.ones((1, 1), dtype=self.dtype)
        for m in range(self.n_sites):
            g = self.gammas[m]
            if m > 0:
                g = g * self.lambdas[m - 1][:, None, None]
            env = np.einsum("ab,aic,bid->cd", env, g.conj(), g, optimize=True)
        return float(np.sqrt(abs(env[0, 0])))

    def to_state_vector(self, cap: int = 1 << 26) -> np.ndarray:
        """Amplitudes in lexicographic order of the site-order physical indices."""
        total = 1
        for d in self.dims:
            total *= d
            if total > cap:
                raise StateTooLargeError(f"dense size {total}+ exceeds cap {cap}")
        amps = self.gammas[0].reshape(self.dims[0], -1)
        for m in range(1, self.n_sites):
            g = self.gammas[m] * self.lambdas[m - 1][:, None, None]
            chi_l, d, chi_r = g.shape
            amps = amps @ g.reshape(chi_l, d * chi_r)
            amps = amps.reshape(-1, chi_r)
        return amps.reshape(-1)

    # ------------------------------------------------------------------- gates

    def apply_single_qudit_gate(self, m: int, g: np.ndarray) -> None:
        """Local unitary on site m; orthonormality flags are preserved."""
        if np.iscomplexobj(g) and not self.complex_mode:
            raise ValueError("complex gate on a real-mode state; promote first")
        _require_unitary(np.asarray(g))
        self.gammas[m] = np.tensordot(g, self.gammas[m], axes=(1, 1)).transpose(1, 0, 2)
        self._retally()

    def apply_two_site_gate(self, m: int, g: np.ndarray) -> None:
        """Unitary over sites (m, m+1): contract, apply, SVD split."""
        if np.iscomplexobj(g) and not self.complex_mode:
            raise ValueError("complex gate on a real-mode state; promote first")
        _require_unitary(np.asarray(g))
        d_l, d_r = self.gammas[m].shape[1], self.gammas[m + 1].shape[1]
        labels = self.labels[m], self.labels[m + 1]
        self.contract_sites(m)
        self.gammas[m] = np.tensordot(g, self.gammas[m], axes=(1, 1)).transpose(1, 0, 2)
        self.decompose_site(m, (d_l, d_r), method="svd", labels=labels)

    def swap_sites(self, m: int) -> None:
        """Exchange physical systems and labels of sites m, m+1 (SVD split)."""
        d_l, d_r = self.dims[m], self.dims[m + 1]
        labels = self.labels[m + 1], self.labels[m]
        self.contract_sites(m)
        g = self.gammas[m]
        chi_l, _, chi_r = g.shape
        self.gammas[m] = np.ascontiguousarray(
            g.reshape(chi_l, d_l, d_r, chi_r).swapaxes(1, 2)
        ).reshape(chi_l, d_r * d_l, chi_r)
        self.decompose_site(m, (d_r, d_l), method="svd", labels=labels)

    # --------------------------------------------------- contraction/decomposition

    def contract_sites(self, m: int) -> None:
        """Merge sites m, m+1 into one site, absorbing the interior weights."""
        if not 0 <= m < self.n_sites - 1:
            raise IndexError(f"bond {m} out of range")
        left = self.gammas[m] * self.lambdas[m][None, None, :]
        chi_l, d1, _ = left.shape
        _, d2, chi_r = self.gammas[m + 1].shape
        merged = np.tensordot(left, self.gammas[m + 1], axes=(2, 0))
        self.gammas[m : m + 2] = [merged.reshape(chi_l, d1 * d2, chi_r)]
        del self.lambdas[m]
        self.labels[m : m + 2] = [(self.labels[m], self.labels[m + 1])]
        self.lortho[m : m + 2] = [self.lortho[m] and self.lortho[m + 1]]
        self.rortho[m : m + 2] = [self.rortho[m] and self.rortho[m + 1]]
        self._retally()

    def decompose_site(self, m, phys_split, method="svd", labels=None) -> None:
        """Split site m with physical dimension d_l*d_r into two sites.

        ``svd`` produces the exact Schmidt rank and weights across the new
        bond; ``trivial`` produces the apparent rank min-of-dims split with
        all-ones weights.
        """
        d_l, d_r = phys_split
        g = self.gammas[m]
        chi_l, d, chi_r = g.shape
        if d != d_l * d_r:
            raise ValueError(f"physical dimension {d} does not split as {d_l}x{d_r}")
        if labels is None:
            lab = self.labels[m]
            if isinstance(lab, tuple) and len(lab) == 2:
                labels = lab
            else:
                raise ValueError("labels required to split a non-merged site")
        lam_l = self.lambdas[m - 1] if m > 0 else None
        lam_r = self.lambdas[m] if m < self.n_bonds else None

        if method == "svd":
            theta = g
            if lam_l is not None:
                theta = theta * lam_l[:, None, None]
            if lam_r is not None:
                theta = theta * lam_r[None, None, :]
            dec = svd_truncated(theta.reshape(chi_l * d_l, d_r * chi_r), self.svd_tol)
            k = dec.rank
            g_left = dec.left.reshape(chi_l, d_l, k)
            g_right = dec.right.reshape(k, d_r, chi_r)
            if lam_l is not None:
                g_left = g_left / lam_l[:, None, None]
            if lam_r is not None:
                g_right = g_right / lam_r[None, None, :]
            new_lam = dec.weights
            # left factor is U up to the divided weights, right factor is V
            flags = (True, False, False, True)
        elif method == "trivial":
            dec = trivial_decompose(g.reshape(chi_l * d_l, d_r * chi_r))
            k = dec.rank
            g_left = dec.left.reshape(chi_l, d_l, k)
            g_right = dec.right.reshape(k, d_r, chi_r)
            new_lam = np.ones(k)
            left_is_m = dec.left.shape[0] >= dec.right.shape[1]
            if left_is_m:
                # right factor is an exact identity block
                r_ok = m == self.n_bonds or _all_ones(self.lambdas[m])
                flags = (False, False, False, r_ok)
            else:
                # left factor is an exact identity block
                l_ok = m == 0 or _all_ones(self.lambdas[m - 1])
                flags = (l_ok, False, False, False)
        else:
            raise ValueError(f"unknown decomposition method {method!r}")

        self.gammas[m : m + 1] = [g_left, g_right]
        self.lambdas.insert(m, new_lam)
        self.labels[m : m + 1] = list(labels)
        self.lortho[m : m + 1] = [flags[0], flags[2]]
        self.rortho[m : m + 1] = [flags[1], flags[3]]
        self._retally()

    # ------------------------------------------------------------------- sweeps

    def _resvd_bond(self, m: int) -> None:
        d_l, d_r = self.gammas[m].shape[1], self.gammas[m + 1].shape[1]
        labels = self.labels[m], self.labels[m + 1]
        self.contract_sites(m)
        self.decompose_site(m, (d_l, d_r), method="svd", labels=labels)

    def sweep(self, direction: str, bonds=None) -> None:
        """Pairwise contract+SVD pass; establishes orthonormality along the way.

        ``right`` processes the bond range left to right (left-orthonormalizing),
        ``left`` right to left.  A full right sweep followed by a full left
        sweep puts the state in canonical form with every bond's weights equal
        to the Schmidt coefficients.
        """
        if bonds is None:
            bonds = range(self.n_bonds)
        bonds = list(bonds)
        if direction == "right":
            for m in bonds:
                self._resvd_bond(m)
        elif direction == "left":
            for m in reversed(bonds):
                self._resvd_bond(m)
        else:
            raise ValueError(f"unknown sweep direction {direction!r}")

    def canonicalize(self) -> None:
        self.sweep("right")
        self.sweep("left")
        # a full right sweep followed by a full left sweep leaves every site
        # orthonormal on both sides; single-bond updates cannot record this
        self.lortho = [True] * self.n_sites
        self.rortho = [True] * self.n_sites

    def is_fully_canonical(self) -> bool:
        return all(self.lortho) and all(self.rortho)

    # --------------------------------------------------------- density matrices

    def _weighted(self, m: int, side: str) -> np.ndarray:
        g = self.gammas[m]
        if side == "left" and m > 0:
            g = g * self.lambdas[m - 1][:, None, None]
        if side == "right" and m < self.n_bonds:
            g = g * self.lambdas[m][None, None, :]
        return g

    def reduced_density_nonlocal(self, m: int) -> np.ndarray:
        """Exact single-site density matrix by contracting the closed network."""
        env_l = np.ones((1, 1), dtype=self.dtype)
        for k in range(m):
            x = self._weighted(k, "right")
            env_l = np.einsum("ab,aic,bid->cd", env_l, x.conj(), x, optimize=True)
        env_r = np.ones((1, 1), dtype=self.dtype)
        for k in range(self.n_sites - 1, m, -1):
            y = self._weighted(k, "left")
            env_r = np.einsum("cd,aic,bid->ab", env_r, y.conj(), y, optimize=True)
        # flanking weights already live in the environment chains
        g = self.gammas[m]
        rho = np.einsum("ab,bvd,awc,cd->vw", env_l, g, g.conj(), env_r, optimize=True)
        return rho if self.complex_mode else rho.real

    def reduced_density_local(self, m: int) -> np.ndarray:
        """Single-site density matrix from the site and its two weight vectors.

        Requires every site left of m to be left-orthonormal and every site
        right of m to be right-orthonormal.
        """
        for k in range(m):
            if not self.lortho[k]:
                raise NotCanonicalError(f"site {k} is not left-orthonormal")
        for k in range(m + 1, self.n_sites):
            if not self.rortho[k]:
                raise NotCanonicalError(f"site {k} is not right-orthonormal")
        g = self.gammas[m]
        if m > 0:
            g = g * self.lambdas[m - 1][:, None, None]
        if m < self.n_bonds:
            g = g * self.lambdas[m][None, None, :]
        chi_l, d, chi_r = g.shape
        flat = g.transpose(1, 0, 2).reshape(d, chi_l * chi_r)
        rho = flat @ flat.conj().T
        return rho if self.complex_mode else rho.real

    def reduced_density(self, m: int) -> np.ndarray:
        """Local form when the flags license it, else the network contraction."""
        left_ok = all(self.lortho[:m])
        right_ok = all(self.rortho[m + 1 :])
        if left_ok and right_ok:
            return self.reduced_density_local(m)
        return self.reduced_density_nonlocal(m)

    # -------------------------------------------------------------- measurement

    def measure_qudit(self, m: int, rng=None, forced: int | None = None) -> int:
        """Sample (or force) site m, project, renormalize, and collapse outward.

        Probabilities come from the diagonal of the reduced density matrix;
        tiny negative entries within the floating-point floor are clamped to
        zero before sampling.  The site keeps its physical dimension, holding
        a one-hot vector, until explicitly removed.
        """
        rho = self.reduced_density(m)
        probs = np.real(np.diag(rho)).copy()
        neg = probs < 0
        if np.any(probs[neg] < -1e-12):
            raise NormalizationError(f"density diagonal at site {m} has entries < -1e-12")
        probs[neg] = 0.0
        total = probs.sum()
        if abs(total - 1.0) > 1e-6:
            raise NormalizationError(f"probability mass {total} at site {m}")
        if forced is not None:
            outcome = int(forced)
            if probs[outcome] <= 0:
                raise ValueError(f"forced outcome {outcome} has zero probability")
        else:
            u = rng.random() * total
            outcome = int(np.searchsorted(np.cumsum(probs), u, side="right"))
            outcome = min(outcome, probs.size - 1)
        g = self.gammas[m]
        proj = np.zeros_like(g)
        proj[:, outcome, :] = g[:, outcome, :] / sqrt(probs[outcome])
        self.gammas[m] = proj
        self.lortho[m] = False
        self.rortho[m] = False
        self._retally()
        # propagate the collapse outward, stopping where ranks stop changing
        for k in range(m, self.n_bonds):
            before = self.lambdas[k].size
            self._resvd_bond(k)
            if self.lambdas[k].size == before:
                break
        for k in range(m - 1, -1, -1):
            before = self.lambdas[k].size
            self._resvd_bond(k)
            if self.lambdas[k].size == before:
                break
        return outcome

    # ------------------------------------------------------- structural editing

    def remove_separable_site(self, m: int) -> None:
        """Delete site m once both flanking bonds have dimension 1."""
        if self.n_sites == 1:
            raise ValueError("cannot remove the only site")
        if (m > 0 and self.lambdas[m - 1].size != 1) or (
            m < self.n_bonds and self.lambdas[m].size != 1
        ):
            raise NotSeparableError(f"site {m} still carries bond dimension > 1")
        g = self.gammas[m]
        scalar = g[0, np.argmax(np.abs(g[0, :, 0])), 0]
        scale = scalar
        if m > 0:
            scale = scale * self.lambdas[m - 1][0]
        if m < self.n_bonds:
            scale = scale * self.lambdas[m][0]
        neighbor = m - 1 if m > 0 else 1
        self.gammas[neighbor] = self.gammas[neighbor] * scale
        if abs(abs(scale) - 1.0) > 1e-12:
            self.lortho[neighbor] = False
            self.rortho[neighbor] = False
        del self.gammas[m]
        del self.labels[m]
        del self.lortho[m]
        del self.rortho[m]
        if m > 0:
            del self.lambdas[m - 1]
        else:
            del self.lambdas[0]
        self._retally()

    def insert_site(self, pos: int, dim: int, value, label=None) -> None:
        """Insert a separable pass-through site at position pos.

        The new site carries identity structure on the bond it interrupts;
        its physical part is a basis vector (``value`` an int), the uniform
        superposition (``value == 'plus'``), or an explicit unit vector.  The
        interrupted bond's weights stay on the left of the new site; the new
        right bond carries ones.
        """
        if not 0 <= pos <= self.n_sites:
            raise IndexError(f"insert position {pos} out of range")
        if isinstance(value, str):
            if value != "plus":
                raise ValueError(f"unknown insertion value {value!r}")
            vec = np.full(dim, 1.0 / sqrt(dim), dtype=self.dtype)
        elif isinstance(value, (int, np.integer)):
            vec = np.zeros(dim, dtype=self.dtype)
            vec[value] = 1.0
        else:
            vec = np.asarray(value, dtype=self.dtype)
            if abs(np.linalg.norm(vec) - 1.0) > 1e-12:
                raise ValueError("inserted physical vector must have unit norm")
        if 0 < pos < self.n_sites:
            chi = self.lambdas[pos - 1].size
            lam_old_ones = _all_ones(self.lambdas[pos - 1])
        else:
            chi = 1
            lam_old_ones = True
        g = np.einsum("ab,p->apb", np.eye(chi, dtype=self.dtype), vec)
        self.gammas.insert(pos, g)
        self.labels.insert(pos, label)
        if pos == 0:
            self.lambdas.insert(0, np.ones(1))
        else:
            self.lambdas.insert(pos, np.ones(chi))
        self.lortho.insert(pos, lam_old_ones if pos > 0 else True)
        self.rortho.insert(pos, True)
        if 0 < pos < self.n_sites - 1 and not lam_old_ones:
            # the interrupted weights stayed left of the new site, so the old
            # right neighbor's left-weighted form changed
            self.lortho[pos + 1] = False
        self._retally()

    # -------------------------------------------------------------- scalar mode

    def promote_to_complex(self) -> None:
        """Switch to complex scalars with zero imaginary parts (tally doubles)."""
        if self.complex_mode:
            warnings.warn("state is already in complex mode", stacklevel=2)
            return
        self.gammas = [g.astype(np.complex128) for g in self.gammas]
        self.complex_mode = True
        self._retally()

    # ---------------------------------------------------------------- profiling

    def schmidt_ranks(self, stage: str) -> RankProfile:
        """True per-bond Schmidt ranks (canonicalizing a working copy if needed)."""
        if self.is_fully_canonical():
            ranks = self.bond_dims()
        else:
            work = self.copy()
            work.canonicalize()
            ranks = work.bond_dims()
        return RankProfile(stage=stage, ranks=ranks, layout=tuple(self.labels))
