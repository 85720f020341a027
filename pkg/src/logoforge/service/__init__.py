from .app import CHECKPOINT_ENV, create_app, resolve_checkpoint_path, serve

__all__ = ["CHECKPOINT_ENV", "create_app", "resolve_checkpoint_path", "serve"]
