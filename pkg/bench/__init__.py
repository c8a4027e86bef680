"""Dataset ingestion and batch runs."""
