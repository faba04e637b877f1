"""Transformers-backed engine: seq2seq beam generation, forced-decoding
token log-probabilities, and mean-pooled encoder embeddings.

Tokenization is owned by this side: /score returns one log-probability per
non-padding label token exactly as the scorer model tokenizes the text
(special tokens such as EOS or language codes included). Models run in eval
mode with gradients disabled, so identical requests give identical answers.
"""

from __future__ import annotations

from .config import ServeConfig
from .toy import EMBED, GENERATE, SCORE


def _forced_bos(tokenizer, lang: str | None):
    """Target-language BOS id for MT tokenizers that use one; None otherwise."""
    if not lang:
        return None
    if hasattr(tokenizer, "get_lang_id"):
        try:
            return tokenizer.get_lang_id(lang)
        except (KeyError, ValueError):
            raise ValueError(f"unsupported language code {lang!r}")
    if hasattr(tokenizer, "lang_code_to_id"):
        mapping = tokenizer.lang_code_to_id
        if lang not in mapping:
            raise ValueError(f"unsupported language code {lang!r}")
        return mapping[lang]
    return None


def _set_src_lang(tokenizer, lang: str | None) -> None:
    if lang and hasattr(tokenizer, "src_lang"):
        known = getattr(tokenizer, "lang_code_to_id", None)
        if known is not None and lang not in known:
            raise ValueError(f"unsupported language code {lang!r}")
        tokenizer.src_lang = lang


class HFEngine:
    embed_dims: int | None = None

    def __init__(self, config: ServeConfig):
        import torch
        from transformers import AutoModel, AutoModelForSeq2SeqLM, AutoTokenizer

        self.torch = torch
        self.config = config
        self.device = torch.device(config.device)
        torch.set_grad_enabled(False)

        capabilities = set()
        self.model_ids: dict[str, str] = {}

        self.generator = self.generator_tok = None
        if config.generator_model:
            self.generator_tok = AutoTokenizer.from_pretrained(config.generator_model)
            self.generator = (
                AutoModelForSeq2SeqLM.from_pretrained(config.generator_model)
                .to(self.device)
                .eval()
            )
            capabilities.add(GENERATE)
            self.model_ids["generator"] = config.generator_model

        self.scorer = self.scorer_tok = None
        if config.scorer_model:
            self.scorer_tok = AutoTokenizer.from_pretrained(config.scorer_model)
            self.scorer = (
                AutoModelForSeq2SeqLM.from_pretrained(config.scorer_model)
                .to(self.device)
                .eval()
            )
            capabilities.add(SCORE)
            self.model_ids["scorer"] = config.scorer_model

        self.embedder = self.embedder_tok = None
        if config.embedder_model:
            self.embedder_tok = AutoTokenizer.from_pretrained(config.embedder_model)
            self.embedder = (
                AutoModel.from_pretrained(config.embedder_model).to(self.device).eval()
            )
            capabilities.add(EMBED)
            self.model_ids["embedder"] = config.embedder_model
            self.embed_dims = int(self.embedder.config.hidden_size)

        if not capabilities:
            raise ValueError("no model configured")
        self.capabilities = frozenset(capabilities)

    # -- generation ---------------------------------------------------------

    def generate(self, prompt: str, n_beams: int, max_new_tokens: int) -> list[tuple[str, float]]:
        torch = self.torch
        tokenizer, model = self.generator_tok, self.generator
        _set_src_lang(tokenizer, self.config.src_lang)
        kwargs = {}
        bos = _forced_bos(tokenizer, self.config.tgt_lang)
        if bos is not None:
            kwargs["forced_bos_token_id"] = bos
        with torch.no_grad():
            encoded = tokenizer(prompt, return_tensors="pt").to(self.device)
            output = model.generate(
                **encoded,
                num_beams=n_beams,
                num_return_sequences=n_beams,
                max_new_tokens=max_new_tokens,
                do_sample=False,
                output_scores=True,
                return_dict_in_generate=True,
                **kwargs,
            )
            beam_indices = getattr(output, "beam_indices", None)
            if beam_indices is not None:
                transition = model.compute_transition_scores(
                    output.sequences, output.scores, beam_indices, normalize_logits=True
                )
                mask = beam_indices[:, : transition.shape[1]] >= 0
            else:  # n_beams == 1 decodes greedily: no beam bookkeeping
                transition = model.compute_transition_scores(
                    output.sequences, output.scores, normalize_logits=True
                )
                generated = output.sequences[:, -transition.shape[1] :]
                mask = generated != model.config.pad_token_id
            logprobs = torch.where(mask, transition, torch.zeros_like(transition)).sum(dim=1)
        texts = tokenizer.batch_decode(output.sequences, skip_special_tokens=True)
        return sorted(zip(texts, (float(x) for x in logprobs)), key=lambda b: -b[1])

    # -- scoring ------------------------------------------------------------

    def validate_lang(self, lang: str) -> bool:
        tokenizer = self.scorer_tok or self.generator_tok
        known = getattr(tokenizer, "lang_code_to_id", None) if tokenizer else None
        if known is None:
            return True
        return lang in known

    def _score_group(self, conditions: list[str], scoreds: list[str], src: str, tgt: str) -> list[list[float]]:
        torch = self.torch
        tokenizer, model = self.scorer_tok, self.scorer
        _set_src_lang(tokenizer, src)
        if hasattr(tokenizer, "tgt_lang"):
            tokenizer.tgt_lang = tgt
        with torch.no_grad():
            encoded = tokenizer(conditions, return_tensors="pt", padding=True).to(self.device)
            labels = tokenizer(
                text_target=scoreds, return_tensors="pt", padding=True
            ).input_ids.to(self.device)
            output = model(
                input_ids=encoded.input_ids,
                attention_mask=encoded.attention_mask,
                labels=labels,
            )
            logprobs = torch.log_softmax(output.logits.float(), dim=-1)
            picked = logprobs.gather(-1, labels.unsqueeze(-1)).squeeze(-1)
        results = []
        for row, label_row in zip(picked, labels):
            keep = label_row != tokenizer.pad_token_id
            results.append([float(x) for x in row[keep]])
        return results

    def score_batch(self, items: list[tuple[str, str, str, str]]) -> list[list[float]]:
        # group by language pair; tokenizer language state is per-group
        order: dict[tuple[str, str], list[int]] = {}
        for i, (_, _, src, tgt) in enumerate(items):
            order.setdefault((src, tgt), []).append(i)
        results: list[list[float]] = [[] for _ in items]
        for (src, tgt), indices in order.items():
            conditions = [items[i][0] for i in indices]
            scoreds = [items[i][1] for i in indices]
            for i, scores in zip(indices, self._score_group(conditions, scoreds, src, tgt)):
                results[i] = scores
        return results

    # -- embeddings ---------------------------------------------------------

    def embed_batch(self, items: list[tuple[str, str]]) -> list[list[float]]:
        tokenizer, model = self.embedder_tok, self.embedder
        with self.torch.no_grad():
            encoded = tokenizer(
                [text for text, _ in items], return_tensors="pt", padding=True, truncation=True
            ).to(self.device)
            encoder = model.get_encoder() if hasattr(model, "get_encoder") else model
            hidden = encoder(
                input_ids=encoded.input_ids, attention_mask=encoded.attention_mask
            ).last_hidden_state
            mask = encoded.attention_mask.unsqueeze(-1)
            pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1)
        return [[float(x) for x in row] for row in pooled]
