import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest


class _Handler(BaseHTTPRequestHandler):
    # behaviour is set per server: "echo", "status500", "garbage", "missing", "slow"
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        self.server.requests.append((self.path, body))
        mode = self.server.mode
        if mode == "status500":
            self.send_response(500)
            self.end_headers()
            return
        if mode == "slow":
            self.server.release.wait(5)
        if mode == "garbage":
            payload = b"not json"
        elif mode == "missing":
            payload = json.dumps({"output": "x"}).encode()
        else:
            payload = json.dumps({"text": body["input"]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def mock_service():
    """Start a local generation service; yields a factory taking the mode."""
    servers = []

    def start(mode="echo"):
        server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        server.mode = mode
        server.requests = []
        server.release = threading.Event()
        threading.Thread(target=server.serve_forever, daemon=True).start()
        servers.append(server)
        host, port = server.server_address
        return f"http://{host}:{port}", server

    yield start
    for server in servers:
        server.release.set()
        server.shutdown()
        server.server_close()


ACCEPTANCE_RESULTS = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(criterion, ok, detail):
        ACCEPTANCE_RESULTS.append((criterion, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}")
