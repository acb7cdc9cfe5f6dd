"""Service subpackage: pydantic models, handlers, FastAPI app."""
