"""Batch model adapter for the kgtext record protocol."""

from .backends import ChatBackend, EchoBackend, make_backend
from .embed import HashEncoder, embed_texts, make_encoder
from .protocol import Request, Response, read_requests
from .run_batch import run_batch

__version__ = "0.1.0"
