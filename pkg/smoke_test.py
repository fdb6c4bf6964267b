from simplextrack import PurePursuitController, RunConfig, simulate_run
from simplextrack.harness import make_track


def main():
    config = RunConfig(controller="pp", track="cosine", max_sim_time=30.0)
    result = simulate_run(PurePursuitController(), make_track("cosine"), config, seed=0)
    print(result.metrics)


if __name__ == "__main__":
    main()
