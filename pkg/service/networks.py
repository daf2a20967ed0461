import math

import torch
from torch import nn

from models.data.env import NUM_ACTIONS
from service.nnkit import LabModule, register_architecture

# Action vocabulary of the denoiser: the real actions, then the two special symbols
NULL_ACTION_TOKEN = NUM_ACTIONS
DROPPED_TOKEN = NUM_ACTIONS + 1


@register_architecture("identity")
class IdentityNet(LabModule):
    def __init__(self, shape: tuple[int, ...] = (1, 16, 16)):
        super().__init__(shape=list(shape))
        self._shape = tuple(shape)

    @property
    def input_shape(self) -> tuple[int, ...]:
        return self._shape

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x


@register_architecture("linear")
class LinearNet(LabModule):
    def __init__(self, in_features: int, out_features: int):
        super().__init__(in_features=in_features, out_features=out_features)
        self.linear = nn.Linear(in_features, out_features)

    @property
    def input_shape(self) -> tuple[int, ...]:
        return (self.linear.in_features,)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.linear(x)


@register_architecture("qnet")
class QNetwork(LabModule):
    """Frame -> one value per action."""

    def __init__(self, frame_size: int = 16, hidden: tuple[int, ...] = (256, 128), num_actions: int = NUM_ACTIONS):
        super().__init__(frame_size=frame_size, hidden=list(hidden), num_actions=num_actions)
        self.frame_size = frame_size
        layers: list[nn.Module] = [nn.Flatten()]
        width = frame_size * frame_size
        for h in hidden:
            layers += [nn.Linear(width, h), nn.ReLU()]
            width = h
        layers.append(nn.Linear(width, num_actions))
        self.net = nn.Sequential(*layers)

    @property
    def input_shape(self) -> tuple[int, ...]:
        return (1, self.frame_size, self.frame_size)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() == 3:
            x = x.unsqueeze(0)
        return self.net(x)


class NoiseEmbedding(nn.Module):
    """Fixed Fourier features of c_noise followed by a learned projection."""

    def __init__(self, dim: int):
        super().__init__()
        self.register_buffer("freqs", torch.exp(torch.linspace(0.0, math.log(32.0), dim // 2)))
        self.proj = nn.Sequential(nn.Linear(2 * (dim // 2), dim), nn.SiLU())

    def forward(self, c_noise: torch.Tensor) -> torch.Tensor:
        angles = c_noise.reshape(-1, 1) * self.freqs
        return self.proj(torch.cat([angles.sin(), angles.cos()], dim=-1))


@register_architecture("denoiser")
class ConditionalDenoiser(LabModule):
    """F_theta(c_in * x, c_noise, history) over single-channel frames.

    History frames are stacked channel-wise with the noisy input and flattened;
    actions are embedded per slot. An all-zero history, DROPPED action tokens
    and a zero condition flag make up the unconditional input, so both paths
    share every parameter.
    """

    def __init__(self, frame_size: int = 16, history_len: int = 4, hidden: int = 128,
                 action_embed: int = 8, noise_embed: int = 16):
        super().__init__(frame_size=frame_size, history_len=history_len, hidden=hidden,
                         action_embed=action_embed, noise_embed=noise_embed)
        self.frame_size = frame_size
        self.history_len = history_len
        pixels = frame_size * frame_size
        self.action_embedding = nn.Embedding(NUM_ACTIONS + 2, action_embed)
        self.noise_embedding = NoiseEmbedding(noise_embed)
        in_features = pixels * (1 + history_len) + history_len * action_embed + noise_embed + 1
        self.body = nn.Sequential(
            nn.Linear(in_features, hidden), nn.SiLU(),
            nn.Linear(hidden, hidden), nn.SiLU(),
            nn.Linear(hidden, pixels),
        )

    @property
    def input_shape(self) -> tuple[int, ...]:
        return (1, self.frame_size, self.frame_size)

    def forward(self, x: torch.Tensor, c_noise: torch.Tensor, history_frames: torch.Tensor,
                history_actions: torch.Tensor, cond_flag: torch.Tensor) -> torch.Tensor:
        batch = x.shape[0]
        parts = [
            x.reshape(batch, -1),
            history_frames.reshape(batch, -1),
            self.action_embedding(history_actions).reshape(batch, -1),
            self.noise_embedding(c_noise.expand(batch)),
            cond_flag.reshape(batch, 1).to(x.dtype),
        ]
        out = self.body(torch.cat(parts, dim=-1))
        return out.reshape(batch, 1, self.frame_size, self.frame_size)


@register_architecture("autoencoder")
class FrameAutoencoder(LabModule):
    def __init__(self, frame_size: int = 16, hidden: int = 128, bottleneck: int = 32):
        super().__init__(frame_size=frame_size, hidden=hidden, bottleneck=bottleneck)
        self.frame_size = frame_size
        pixels = frame_size * frame_size
        self.encoder = nn.Sequential(nn.Flatten(), nn.Linear(pixels, hidden), nn.SiLU(), nn.Linear(hidden, bottleneck))
        self.decoder = nn.Sequential(nn.Linear(bottleneck, hidden), nn.SiLU(), nn.Linear(hidden, pixels), nn.Sigmoid())

    @property
    def input_shape(self) -> tuple[int, ...]:
        return (1, self.frame_size, self.frame_size)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        squeeze = x.dim() == 3
        if squeeze:
            x = x.unsqueeze(0)
        out = self.decoder(self.encoder(x)).reshape(x.shape[0], 1, self.frame_size, self.frame_size)
        return out[0] if squeeze else out
