"""TwinMon test suite."""
