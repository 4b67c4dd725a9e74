from mmgn4py import LinkModel, SolverConfig, metrics, solve, synth

model = LinkModel.probit(sigma=1.0)

truth = synth.gen_nonspiky(300, 300, r_star=1, seed=1)
omega = synth.sample_omega(300, 300, rho=0.5, seed=2)
obs = synth.sample_labels(truth, omega, model, seed=3)


def progress(iteration, outcome):
    print(f"{iteration}: nll={outcome.ll_new:.6f} step={outcome.alpha}")


report = solve(obs, model, SolverConfig(rank=1), callback=progress)
print(f"stopped: {report.stop_reason.value} after {report.outer_iterations} iterations")

result = metrics.evaluate(report.factors, truth, model)
print(f"relative error: {result.relative_error:.4f}")
print(f"Hellinger distance: {result.hellinger:.6f}")
