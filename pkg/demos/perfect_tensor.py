"""
The perfect tensor and its spectrum
===================================

Ideal affinities are one for distinct same-cluster tuples and zero
otherwise.  The weight matrix is then block diagonal and its spectrum is
known in closed form.
"""
import numpy as np

from tscc.affinity import perfect_weight_matrix
from tscc.diagnostics import perfect_spectrum
from tscc.spectral import normalize_symmetric, spectral_embedding

sizes, d = (5, 7, 9), 1
W = perfect_weight_matrix(sizes, d)
print("block of the first cluster:\n", W.entries[:5, :5])
print("degrees:", W.degrees[[0, 5, 12]])

# normalized: exactly K eigenvalues equal one
Z = normalize_symmetric(W)
emb = spectral_embedding(Z, len(sizes))
closed = perfect_spectrum(sizes, d)
print("dense top 5:  ", np.round(emb.eigenvalues[:5], 6))
print("closed form:  ", np.round(closed.eigenvalues[:5], 6))
print("max deviation:", np.abs(emb.eigenvalues - closed.eigenvalues).max())

# rows of U have norm 1/sqrt(N_k)
print("row norms:", np.round(np.linalg.norm(emb.U, axis=1)[[0, 5, 12]], 6),
      "expected", np.round(1 / np.sqrt(sizes), 6))

# unnormalized: degrees once, then (d+1) perm(N_k-2, d) with multiplicity N_k-1
dense = np.sort(np.linalg.eigvalsh(W.entries))[::-1]
un = perfect_spectrum(sizes, d, "unnormalized")
print("unnormalized multiplicities:", un.multiplicities)
print("trace check:", np.trace(W.entries), un.trace, "max deviation", np.abs(dense - un.eigenvalues).max())
