"""
U, T and V
==========

80 and 20 points on two noisy lines.  T rescales each row of U by the
square root of its cluster size, V by its own norm.  The separation factor
beta of the true cluster centers usually orders as U <= T <= V.
"""
import numpy as np

from tscc.diagnostics import (
    identification_error,
    identification_error_bounds,
    misclassification_rate,
    separation_factor,
    total_variation,
)
from tscc.modelgen import MixtureModel, random_lines_model, sample_mixture
from tscc.spectral import kmeans_cluster, row_normalize, run_tscc

base = random_lines_model(K=2, n_per_line=20, noise=0.025, seed=0)
ds = sample_mixture(MixtureModel(base.flats, [80, 20], base.extent, 0.025, seed=0))
res = run_tscc(ds.points, d=1, K=2, sigma=0.2)
U = res.embedding.U
spaces = {"U": U, "T": row_normalize(U, "T", ds.labels), "V": row_normalize(U, "V")}

for name, rows in spaces.items():
    labels = kmeans_cluster(rows, 2).labels
    print("%s  beta %.4f  e_id %.3f  k-means error %.1f%%" % (
        name, separation_factor(rows, ds.labels), identification_error(rows, ds.labels),
        100 * misclassification_rate(labels, ds.labels)))

tv = total_variation(U, ds.labels)
eps1 = min(1.0, 2 * 20 / 100)
print("TV %.4f, bounds on e_id:" % tv, identification_error_bounds(tv, eps1))
