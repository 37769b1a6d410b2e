TOOL_NAME = "wpt-harvest-sim"
__version__ = "0.1.0"
