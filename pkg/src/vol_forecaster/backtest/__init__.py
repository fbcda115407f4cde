"""Walk-forward splits, tuning and the backtest driver."""
