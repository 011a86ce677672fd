"""Variance-adaptor predictor stack and its checkpoints.

The full TTS model is out of scope here; what this module carries is the
part the embeddings come from: a phone embedding table and one
conv-relu-norm-dropout x2 + linear predictor per prosody stream, hidden
width 256. Checkpoints built by build_checkpoint are seeded random
initializations standing in for pretrained weights, so the numbers flowing
out are structurally faithful but not acoustically meaningful.

Capture points: tap="hidden" returns each predictor's 256-wide hidden
sequence; tap="bins" returns the quantized-bin embedding lookups for pitch
and energy instead (duration has no bins, so its hidden sequence is kept).
In speech_text operation the ground-truth pitch drives the bin embedding
added before the energy predictor (teacher forcing); in text_only operation
the model's own predictions do.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .audio import ProsodyTargets
from .phones import PHONES, PHONE_INDEX

EMBED_DIM = 256
N_BINS = 256
PITCH_RANGE = (50.0, 600.0)
ENERGY_RANGE = (0.0, 1.0)

TAPS = ("hidden", "bins")


class StreamPredictor(nn.Module):
    def __init__(self, dim: int = EMBED_DIM, kernel: int = 3, dropout: float = 0.1):
        super().__init__()
        self.conv1 = nn.Conv1d(dim, dim, kernel, padding=kernel // 2)
        self.norm1 = nn.LayerNorm(dim)
        self.conv2 = nn.Conv1d(dim, dim, kernel, padding=kernel // 2)
        self.norm2 = nn.LayerNorm(dim)
        self.drop = nn.Dropout(dropout)
        self.head = nn.Linear(dim, 1)

    def hidden(self, x: torch.Tensor) -> torch.Tensor:
        """(L, dim) phone sequence -> (L, dim) hidden sequence."""
        h = torch.relu(self.conv1(x.t().unsqueeze(0))).squeeze(0).t()
        h = self.drop(self.norm1(h))
        h = torch.relu(self.conv2(h.t().unsqueeze(0))).squeeze(0).t()
        return self.drop(self.norm2(h))

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        h = self.hidden(x)
        return h, self.head(h).squeeze(-1)


class ProsodyModel(nn.Module):
    def __init__(self, dim: int = EMBED_DIM):
        super().__init__()
        self.embed = nn.Embedding(len(PHONES), dim)
        self.duration = StreamPredictor(dim)
        self.pitch = StreamPredictor(dim)
        self.energy = StreamPredictor(dim)
        self.pitch_bin_embed = nn.Embedding(N_BINS, dim)
        self.energy_bin_embed = nn.Embedding(N_BINS, dim)
        # interior edges only, so the clamped extremes land in bins 0 and N_BINS-1
        self.register_buffer(
            "pitch_bins",
            torch.exp(torch.linspace(np.log(PITCH_RANGE[0]), np.log(PITCH_RANGE[1]), N_BINS + 1))[1:-1],
        )
        self.register_buffer(
            "energy_bins", torch.linspace(ENERGY_RANGE[0], ENERGY_RANGE[1], N_BINS + 1)[1:-1]
        )

    def quantize_pitch(self, values: torch.Tensor) -> torch.Tensor:
        return torch.bucketize(values.clamp(*PITCH_RANGE), self.pitch_bins)

    def quantize_energy(self, values: torch.Tensor) -> torch.Tensor:
        return torch.bucketize(values.clamp(*ENERGY_RANGE), self.energy_bins)

    def capture(
        self, phone_ids: torch.Tensor, targets: ProsodyTargets | None = None, tap: str = "hidden"
    ) -> dict[str, np.ndarray]:
        """Per-stream (L x dim) embeddings for one utterance.

        targets=None is the inference path (text only); passing targets is
        the teacher-forced path, where ground-truth pitch/energy select the
        bin embeddings instead of the model's own predictions.
        """
        if tap not in TAPS:
            raise ValueError(f"unknown tap {tap!r}, expected one of {TAPS}")
        with torch.no_grad():
            x0 = self.embed(phone_ids)
            h_dur, _ = self.duration(x0)
            h_pitch, pitch_hat = self.pitch(x0)
            pitch_used = (
                torch.as_tensor(targets.pitch, dtype=torch.float32) if targets is not None else pitch_hat
            )
            x1 = x0 + self.pitch_bin_embed(self.quantize_pitch(pitch_used))
            h_energy, energy_hat = self.energy(x1)
            energy_used = (
                torch.as_tensor(targets.energy, dtype=torch.float32) if targets is not None else energy_hat
            )
            if tap == "hidden":
                streams = {"duration": h_dur, "pitch": h_pitch, "energy": h_energy}
            else:
                streams = {
                    "duration": h_dur,
                    "pitch": self.pitch_bin_embed(self.quantize_pitch(pitch_used)),
                    "energy": self.energy_bin_embed(self.quantize_energy(energy_used)),
                }
        return {name: t.detach().numpy().astype(np.float64) for name, t in streams.items()}

    def predict(
        self, phone_ids: torch.Tensor, targets: ProsodyTargets | None = None
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """(duration, pitch, energy) scalar predictions, teacher-forced when
        targets are given; used by the fine-tuning loop, keeps gradients."""
        x0 = self.embed(phone_ids)
        _, dur_hat = self.duration(x0)
        _, pitch_hat = self.pitch(x0)
        pitch_used = (
            torch.as_tensor(targets.pitch, dtype=torch.float32) if targets is not None else pitch_hat.detach()
        )
        x1 = x0 + self.pitch_bin_embed(self.quantize_pitch(pitch_used))
        _, energy_hat = self.energy(x1)
        return dur_hat, pitch_hat, energy_hat


def phone_ids(phones) -> torch.Tensor:
    try:
        return torch.tensor([PHONE_INDEX[p] for p in phones], dtype=torch.long)
    except KeyError as exc:
        raise ValueError(f"phone {exc.args[0]!r} is not in the model inventory") from None


def build_checkpoint(path: str | Path, seed: int = 0) -> Path:
    """Seeded random-init weights in place of a pretrained checkpoint."""
    torch.manual_seed(seed)
    model = ProsodyModel()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {"state_dict": model.state_dict(), "phones": list(PHONES), "dim": EMBED_DIM, "epoch": None},
        path,
    )
    return path


def load_checkpoint(path: str | Path) -> tuple[ProsodyModel, dict]:
    blob = torch.load(path, map_location="cpu", weights_only=True)
    if list(blob.get("phones", [])) != list(PHONES):
        raise ValueError(f"{path}: checkpoint phone inventory does not match this build")
    model = ProsodyModel(dim=blob["dim"])
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return model, {"epoch": blob.get("epoch")}


def finetune(
    checkpoint: str | Path,
    utterances,
    lexicon,
    out_dir: str | Path,
    epochs: int,
    lr: float = 1e-3,
    seed: int = 0,
) -> list[Path]:
    """Teacher-forced fine-tuning on (audio, text) pairs, checkpointing
    every epoch so embeddings can be re-extracted per epoch.

    Returns the checkpoint paths, out_dir/epoch{n}.pt for n = 1..epochs.
    """
    from .jobs import utterance_phones  # deferred: jobs imports this module

    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    from .audio import ground_truth_prosody, read_wav

    model, _ = load_checkpoint(checkpoint)
    torch.manual_seed(seed)
    model.train()
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    prepared = []
    for utt in utterances:
        if utt.audio is None:
            raise ValueError(f"utterance {utt.utt_id!r} has no audio; fine-tuning needs (audio, text) pairs")
        phones, _ = utterance_phones(utt, lexicon)
        samples, sr = read_wav(utt.audio)
        prepared.append((phone_ids(phones), ground_truth_prosody(samples, sr, len(phones))))

    paths = []
    for epoch in range(1, epochs + 1):
        for ids, targets in prepared:
            opt.zero_grad()
            dur_hat, pitch_hat, energy_hat = model.predict(ids, targets)
            loss = (
                torch.mean((dur_hat - torch.log1p(torch.as_tensor(targets.duration, dtype=torch.float32))) ** 2)
                + torch.mean((pitch_hat - torch.as_tensor(targets.pitch / PITCH_RANGE[1], dtype=torch.float32)) ** 2)
                + torch.mean((energy_hat - torch.as_tensor(targets.energy, dtype=torch.float32)) ** 2)
            )
            loss.backward()
            opt.step()
        path = out_dir / f"epoch{epoch}.pt"
        torch.save(
            {"state_dict": model.state_dict(), "phones": list(PHONES), "dim": EMBED_DIM, "epoch": epoch},
            path,
        )
        paths.append(path)
    model.eval()
    return paths
