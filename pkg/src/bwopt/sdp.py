"""Semidefinite-programming export of the Gaussian barycenter problem.

The barycenter of covariances ``S_1..S_k`` with weights ``p_i`` solves

    minimize  tr(B) - 2 sum_i p_i tr(X_i)
    subject to  [[S_i, X_i], [X_i^T, B]] >= 0   for each atom,

where ``B`` is the barycenter candidate shared across blocks and ``X_i``
are coupling cross-covariances.  This module writes that program in the
sparse SDPA text format (``.dat-s``) for external solvers; nothing here
solves it.  See the README for the exact variable ordering contract.

Encoding (SDPA dual form, ``max tr(F0 Y)`` s.t. ``tr(Fj Y) = c_j``,
``Y >= 0``): ``Y`` has one ``2d x 2d`` block per atom holding
``[[S_i, X_i], [X_i^T, B]]``.  Equality constraints pin the upper-left
block of each atom block to ``S_i`` and force the lower-right blocks of
all atom blocks to agree.  The objective matrix pays ``2 p_i tr(X_i)``
through the cross-diagonal and ``-tr(B)`` through the first block, so the
reported SDPA objective is the negative of the minimized value above.
"""

import numpy as np

from .geometry import symmetrize


def _upper_triangle(d):
    for r in range(d):
        for s in range(r, d):
            yield r, s


def sdp_export(p, path):
    """Write the coupling SDP for ``p`` in sparse SDPA format.

    Constraint ordering: first, for each atom in index order, the
    upper-triangle entries (row-major) of its data block; then, for each
    atom after the first, the upper-triangle agreement constraints tying
    its lower-right block to the first atom's.  All entries are written
    with full float precision.

    Parameters
    ----------
    p : DiscreteDistribution
        Centered atoms; means are ignored.
    path : str
    """
    d = p.dim
    k = p.size
    tri = list(_upper_triangle(d))
    per_block = len(tri)
    m = (2 * k - 1) * per_block

    c = []
    for a in p.atoms:
        cov = a.cov.entries
        for r, s in tri:
            c.append(cov[r, s] if r == s else 2.0 * cov[r, s])
    c.extend([0.0] * ((k - 1) * per_block))

    lines = []
    lines.append(f'"Gaussian barycenter coupling SDP: {k} atoms, dimension {d}')
    lines.append(f"{m}")
    lines.append(f"{k}")
    lines.append(" ".join(str(2 * d) for _ in range(k)))
    lines.append(" ".join(repr(float(v)) for v in c))

    # Objective F0: cross-diagonal p_i in every block, -I on the
    # lower-right of block 1 only (the shared barycenter block is paid once).
    for i in range(k):
        w = float(p.weights[i])
        for r in range(d):
            lines.append(f"0 {i + 1} {r + 1} {d + r + 1} {w!r}")
    for r in range(d):
        lines.append(f"0 1 {d + r + 1} {d + r + 1} {float(-1.0)!r}")

    # Data constraints: one unit entry per matrix, atom-major.
    j = 0
    for i in range(k):
        for r, s in tri:
            j += 1
            lines.append(f"{j} {i + 1} {r + 1} {s + 1} 1.0")
    # Coupling constraints: +1 in atom i's barycenter block, -1 in atom 1's.
    for i in range(1, k):
        for r, s in tri:
            j += 1
            lines.append(f"{j} {i + 1} {d + r + 1} {d + s + 1} 1.0")
            lines.append(f"{j} 1 {d + r + 1} {d + s + 1} -1.0")

    with open(path, "w") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def read_sdpa(path):
    """Parse a sparse SDPA file back into its raw parts.

    Returns
    -------
    dict
        ``m`` constraint count, ``block_sizes`` list, ``c`` array, and
        ``entries`` as tuples ``(matno, blockno, i, j, value)`` with
        1-based indices.
    """
    header = []
    entries = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith('"') or line.startswith("*"):
                continue
            cleaned = line.translate(str.maketrans("{},()", "     "))
            if len(header) < 4:
                header.append(cleaned)
                continue
            parts = cleaned.split()
            entries.append((int(parts[0]), int(parts[1]), int(parts[2]),
                            int(parts[3]), float(parts[4])))
    m = int(header[0].split()[0])
    nblocks = int(header[1].split()[0])
    block_sizes = [int(v) for v in header[2].split()]
    if len(block_sizes) != nblocks:
        raise ValueError(f"{path}: block structure lists {len(block_sizes)} "
                         f"sizes for {nblocks} blocks")
    c = np.array([float(v) for v in header[3].split()])
    if c.shape[0] != m:
        raise ValueError(f"{path}: RHS vector has {c.shape[0]} entries for {m} constraints")
    return {"m": m, "block_sizes": block_sizes, "c": c, "entries": entries}


def sdpa_inner_product(entries, matno, blocks):
    """Evaluate ``tr(F_matno Y)`` for a block-diagonal ``Y``.

    ``blocks`` maps 1-based block numbers to symmetric arrays.  Upper
    triangle entries count twice off the diagonal, matching the symmetric
    sparse storage.
    """
    total = 0.0
    for mat, blk, i, j, v in entries:
        if mat != matno:
            continue
        y = blocks[blk]
        total += v * y[i - 1, j - 1] * (1.0 if i == j else 2.0)
    return total


def coupling_cross_covariance(sigma_star, atom_cov):
    """Cross-covariance of the optimal coupling from ``sigma_star`` to an atom.

    Equals ``sigma_star @ T`` with ``T`` the transport map; generally not
    symmetric, but its trace is the cross term of the squared distance.
    """
    sq = sigma_star.sqrt_entries()
    isq = sigma_star.inv_sqrt_entries()
    mid = symmetrize(sq @ atom_cov.entries @ sq)
    vals, vecs = np.linalg.eigh(mid)
    msqrt = (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.T
    return sq @ msqrt @ isq


def sdp_objective_at(p, sigma_star):
    """Programme objective ``tr(B) - 2 sum_i p_i tr(X_i)`` at the plug-in point.

    The plug-in point uses the optimal coupling cross-covariances built
    from ``sigma_star``; when ``sigma_star`` is the barycenter this is the
    SDP optimum, which relates to the barycenter functional by
    ``value = 2 F(sigma_star) - sum_i p_i tr(S_i)``.

    Returns
    -------
    (float, list of ndarray)
        The objective value and the feasible ``2d x 2d`` blocks
        ``[[S_i, X_i], [X_i^T, B]]``.
    """
    d = p.dim
    value = sigma_star.trace
    blocks = []
    for i, a in enumerate(p.atoms):
        x = coupling_cross_covariance(sigma_star, a.cov)
        value -= 2.0 * float(p.weights[i]) * float(np.trace(x))
        block = np.zeros((2 * d, 2 * d))
        block[:d, :d] = a.cov.entries
        block[:d, d:] = x.T
        block[d:, :d] = x
        block[d:, d:] = sigma_star.entries
        blocks.append(block)
    return value, blocks
