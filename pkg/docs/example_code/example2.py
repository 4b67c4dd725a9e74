import sys

from mmgn4py import LinkModel, obsdata, select_rank
from mmgn4py.detail import io

# observations file and matrix size on command line
obs = obsdata.read_triplets(sys.argv[1], m=int(sys.argv[2]), n=int(sys.argv[3]))
model = LinkModel.logistic(sigma=1.0)

selection = select_rank(obs, model, candidates=range(1, 6), seed=42, jobs=4)
for rank, ll in selection.per_rank_validation_ll:
    print(f"rank {rank}: validation log-likelihood {ll:.3f}")
print(f"chosen rank: {selection.chosen_rank}")

factors = selection.report.factors
io.write_factors(factors.u, factors.v, "factors.mmgn")
