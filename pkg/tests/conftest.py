import contextlib
import random
import threading

import pytest

from enclda import paillier, wire
from enclda.errors import EncldaError, TransportError
from enclda.transport import Endpoint, loopback_pair

# keypairs are expensive; share them across the whole run
_KEY_CACHE: dict[tuple[int, int], tuple] = {}


def cached_keypair(bits: int, seed: int = 1):
    key = (bits, seed)
    if key not in _KEY_CACHE:
        _KEY_CACHE[key] = paillier.keygen(bits, rng=random.Random(seed))
    return _KEY_CACHE[key]


@pytest.fixture(scope="session")
def key256():
    return cached_keypair(256)


@pytest.fixture(scope="session")
def key512():
    return cached_keypair(512)


@contextlib.contextmanager
def client_responder(client_session, record=False):
    """Loopback endpoints with the client side running in a thread.

    Yields the server endpoint; the client responder answers until the
    channel closes or the client aborts.
    """
    server_channel, client_channel = loopback_pair()
    server_end = Endpoint(server_channel, record=record)
    client_end = Endpoint(client_channel)
    server_end.session_id = 1
    client_end.session_id = 1
    failures = []

    def pump():
        while True:
            try:
                msg = client_end.recv()
            except TransportError:
                return
            if isinstance(msg, wire.ErrorMessage):
                return
            try:
                client_end.send(client_session.handle(msg))
            except EncldaError as exc:
                failures.append(exc)
                try:
                    client_end.send(wire.ErrorMessage(code=wire.ERR_PHASE,
                                                      message=str(exc)))
                except EncldaError:
                    pass
                return

    thread = threading.Thread(target=pump, daemon=True)
    thread.start()
    try:
        yield server_end
    finally:
        server_end.close()
        client_end.close()
        thread.join(timeout=5.0)
    if failures:
        raise failures[0]
