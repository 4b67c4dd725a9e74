from mmgn4py import experiment

config = experiment.config_from_dict(dict(
    truth=dict(kind="nonspiky", m=200, n=200, rank_star=1),
    model=dict(kind="probit", sigma=1.0),
    solver=dict(rank=1),
    sweep=dict(axis="rho", values=[0.2, 0.4, 0.6, 0.8, 1.0]),
    replicates=5,
    seed=12345))

results = experiment.run_sweep(config, jobs=4)
medians = experiment.summarize(results)
for row in medians:
    if row.metric == "relative_error":
        print(f"rho={row.axis_value}: median relative error {row.median:.4f}")
print(experiment.sweep_slopes(config, medians))
