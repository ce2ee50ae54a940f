"""Text rendering of reports."""
