class SchemaError(Exception):
    """The input CSV does not have the columns or rows the figure kind needs."""
