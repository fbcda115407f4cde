"""Option quote filters, straddle returns and VRP portfolio sorts."""
