"""Optional real-socket backend for the transport.

One UDP socket is bound per local address so the operating system's static
routes pick the matching source address and interface for each radio link;
the simulator remains the reference backend and the only one exercised by
the acceptance suite.
"""

from __future__ import annotations

import select
import socket

from .config import Link, ordered_links

Address = tuple[str, int]


class UdpEndpoint:
    """A pair of datagram sockets, one per link, with static peer addresses."""

    def __init__(self, local: dict[Link, Address], remote: dict[Link, Address]):
        if set(local) != set(remote):
            raise ValueError("local and remote address maps must cover the same links")
        self.remote = dict(remote)
        self._socks: dict[Link, socket.socket] = {}
        for link in ordered_links(local):
            sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            sock.bind(local[link])
            sock.setblocking(False)
            self._socks[link] = sock

    def local_address(self, link: Link) -> Address:
        return self._socks[link].getsockname()

    def send(self, link: Link, raw: bytes) -> None:
        self._socks[link].sendto(raw, self.remote[link])

    def poll(self, timeout_s: float = 0.0) -> list[tuple[Link, bytes]]:
        """Drain whatever is readable; returns (link, datagram) pairs."""
        by_fd = {sock.fileno(): link for link, sock in self._socks.items()}
        readable, _, _ = select.select(list(by_fd), [], [], timeout_s)
        out = []
        for fd in readable:
            link = by_fd[fd]
            sock = self._socks[link]
            while True:
                try:
                    data, _ = sock.recvfrom(65535)
                except BlockingIOError:
                    break
                out.append((link, data))
        return out

    def close(self) -> None:
        for sock in self._socks.values():
            sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
