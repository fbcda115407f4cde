"""Run the pipeline with ``python -m vol_forecaster``."""

from vol_forecaster.cli import run  # pragma: no cover

if __name__ == "__main__":  # pragma: no cover
    run()
