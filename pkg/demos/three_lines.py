"""
Three lines in the plane
========================

Three random lines in the unit square, 25 points each.  Clean data with a
tiny sigma gives almost the perfect tensor; with 2.5% noise the errors sit
near the crossings.
"""
import numpy as np

from tscc.affinity import TensorSpec, deviation_norm, perfect_weight_matrix
from tscc.cli import lines_dataset
from tscc.diagnostics import bound_constants, check_perturbation_bound, misclassification_rate
from tscc.spectral import run_tscc

for noise, sigma in [(0.0, 1e-5), (0.025, 0.184)]:
    ds = lines_dataset(noise)
    res = run_tscc(ds.points, d=1, K=3, sigma=sigma)
    print("noise %.3f  sigma %g" % (noise, sigma))
    print("  top eigenvalues:", np.round(res.embedding.eigenvalues[:4], 4))
    print("  misclassified:  %.1f%%" % (100 * misclassification_rate(res.labels, ds.labels)))

    # how far the affinity tensor is from the perfect one, and what the bound says
    _, x = deviation_norm(TensorSpec("polar_affine", sigma=sigma, d=1), ds.points, ds.labels)
    sizes = np.bincount(ds.labels)
    pdeg = np.array([perfect_weight_matrix([s], 1).degrees[0] for s in sizes])[ds.labels]
    const = bound_constants(3, 1, sizes, res.weights.degrees, pdeg)
    chk = check_perturbation_bound(res.embedding.U, ds.labels, x, const)
    print("  eps2 %.4f  C1 %.2e  deviation %.2e  threshold %.2e" % (const.epsilon2, const.C1, x, chk.threshold))
    if chk.hypothesis_met:
        print("  TV %.2e <= C1 * deviation %.2e" % (chk.tv, const.C1 * x))
    else:
        print("  deviation too large for the bound to say anything; TV = %.3f" % chk.tv)
