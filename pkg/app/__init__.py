"""TwinMon - Digital-twin runtime verification for a differential-drive robot."""

__version__ = "0.1.0"
__app_name__ = "TwinMon"
