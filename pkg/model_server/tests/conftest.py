"""Fixtures: toy app, a locally built tiny random-weight checkpoint, live server."""

from __future__ import annotations

import threading
import time

import pytest
from fastapi.testclient import TestClient

from model_server.app import create_app
from model_server.config import ServeConfig

TINY_WORDS = (
    "obama fue a nueva york hello world the cat sat on mat none "
    "merkel visito paris einstein princeton"
).split()


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory) -> str:
    """Tiny random-weight seq2seq checkpoint with a whitespace tokenizer.

    The hub is unreachable from this sandbox, so the smallest available
    checkpoint is one we build locally; weights are seeded for determinism.
    """
    torch = pytest.importorskip("torch")
    from tokenizers import Tokenizer, models, pre_tokenizers
    from transformers import PreTrainedTokenizerFast, T5Config, T5ForConditionalGeneration

    vocab = {"<pad>": 0, "</s>": 1, "<unk>": 2}
    for word in TINY_WORDS:
        vocab.setdefault(word, len(vocab))
    tokenizer = Tokenizer(models.WordLevel(vocab, unk_token="<unk>"))
    tokenizer.pre_tokenizer = pre_tokenizers.WhitespaceSplit()
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tokenizer, pad_token="<pad>", eos_token="</s>", unk_token="<unk>"
    )
    path = tmp_path_factory.mktemp("tiny-checkpoint")
    fast.save_pretrained(path)
    config = T5Config(
        vocab_size=len(vocab),
        d_model=32,
        d_ff=64,
        d_kv=8,
        num_layers=2,
        num_heads=2,
        decoder_start_token_id=0,
        pad_token_id=0,
        eos_token_id=1,
    )
    torch.manual_seed(1234)
    T5ForConditionalGeneration(config).save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def toy_config() -> ServeConfig:
    return ServeConfig(engine="toy", max_n_beams=100)


@pytest.fixture(scope="session")
def toy_client(toy_config) -> TestClient:
    return TestClient(create_app(toy_config))


@pytest.fixture(scope="session")
def hf_config(tiny_checkpoint) -> ServeConfig:
    return ServeConfig(
        engine="hf",
        generator_model=tiny_checkpoint,
        scorer_model=tiny_checkpoint,
        embedder_model=tiny_checkpoint,
        max_n_beams=16,
    )


@pytest.fixture(scope="session")
def hf_client(hf_config) -> TestClient:
    return TestClient(create_app(hf_config))


@pytest.fixture(scope="session")
def live_toy_server():
    """Real uvicorn server on an ephemeral localhost port (toy engine)."""
    import uvicorn

    app = create_app(ServeConfig(engine="toy", max_n_beams=100))
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 15
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.05)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)
