"""Configurable residual backbone with segmentation / classification heads.

Parameters are namespaced ``backbone.*`` and ``head.*``; the backbone name
and shape set is fixed by the preset, which is what makes weight transfer
across pre-training settings well-defined. Initialization is derived per
parameter name from the seed, so it is independent of construction order.

The segmentation head is a (optionally multi-branch) dilated 3x3 classifier
whose logits are upsampled bilinearly to the input resolution inside the
model. Requesting a ``seg_output_stride`` below the preset's nominal stride
converts trailing stride-2 stages into dilated stride-1 stages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError
from .seeds import derived_rng

SETTINGS = ("random", "classification", "full_seg", "scribble_seg")


@dataclass(frozen=True)
class BackbonePreset:
    name: str
    stem_channels: int
    stem_kernel: int
    stem_stride: int
    max_pool: bool
    stage_channels: tuple[int, ...]
    stage_blocks: tuple[int, ...]
    stage_strides: tuple[int, ...]

    @property
    def nominal_stride(self) -> int:
        s = self.stem_stride * (2 if self.max_pool else 1)
        for st in self.stage_strides:
            s *= st
        return s

    @property
    def out_channels(self) -> int:
        return self.stage_channels[-1]


PRESETS: dict[str, BackbonePreset] = {
    "tiny": BackbonePreset(
        name="tiny",
        stem_channels=16,
        stem_kernel=3,
        stem_stride=1,
        max_pool=False,
        stage_channels=(32, 64, 64),
        stage_blocks=(1, 1, 1),
        stage_strides=(2, 2, 2),
    ),
    "resnet34-like": BackbonePreset(
        name="resnet34-like",
        stem_channels=64,
        stem_kernel=7,
        stem_stride=2,
        max_pool=True,
        stage_channels=(64, 128, 256, 512),
        stage_blocks=(3, 4, 6, 3),
        stage_strides=(1, 2, 2, 2),
    ),
}


def get_preset(name: str) -> BackbonePreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown backbone preset {name!r}; available: {sorted(PRESETS)}") from None


@dataclass
class ModelConfig:
    backbone_preset: str = "tiny"
    num_classes: int = 2
    head: str = "segmentation"  # or "classification"
    seg_output_stride: int | None = None  # None -> preset nominal stride
    input_channels: int = 3
    head_dilations: tuple[int, ...] = (2,)

    def validate(self) -> None:
        get_preset(self.backbone_preset)
        if self.head not in ("segmentation", "classification"):
            raise ConfigError(f"unknown head {self.head!r}")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")


class BasicBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, stride: int = 1, dilation: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=dilation, dilation=dilation, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, stride=1, padding=dilation, dilation=dilation, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)
        self.downsample = None
        if stride != 1 or in_ch != out_ch:
            self.downsample = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_ch),
            )

    def forward(self, x):
        identity = x if self.downsample is None else self.downsample(x)
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + identity)


class ResidualBackbone(nn.Module):
    def __init__(self, preset: BackbonePreset, input_channels: int = 3, output_stride: int | None = None):
        super().__init__()
        self.preset = preset
        pad = preset.stem_kernel // 2
        self.stem_conv = nn.Conv2d(
            input_channels, preset.stem_channels, preset.stem_kernel,
            stride=preset.stem_stride, padding=pad, bias=False,
        )
        self.stem_bn = nn.BatchNorm2d(preset.stem_channels)
        self.pool = nn.MaxPool2d(3, stride=2, padding=1) if preset.max_pool else None

        current_stride = preset.stem_stride * (2 if preset.max_pool else 1)
        dilation = 1
        stages = []
        in_ch = preset.stem_channels
        for ch, n_blocks, st in zip(preset.stage_channels, preset.stage_blocks, preset.stage_strides):
            if output_stride is not None and current_stride * st > output_stride:
                dilation *= st
                st = 1
            blocks = [BasicBlock(in_ch, ch, stride=st, dilation=dilation)]
            blocks += [BasicBlock(ch, ch, stride=1, dilation=dilation) for _ in range(n_blocks - 1)]
            stages.append(nn.Sequential(*blocks))
            current_stride *= st
            in_ch = ch
        self.stages = nn.Sequential(*stages)
        self.effective_stride = current_stride
        self.out_channels = preset.out_channels

    def forward(self, x):
        x = F.relu(self.stem_bn(self.stem_conv(x)))
        if self.pool is not None:
            x = self.pool(x)
        return self.stages(x)


class DilatedSegHead(nn.Module):
    """Sum of parallel dilated 3x3 classifiers (one branch by default)."""

    def __init__(self, in_channels: int, num_classes: int, dilations: tuple[int, ...] = (2,)):
        super().__init__()
        self.branches = nn.ModuleList(
            [nn.Conv2d(in_channels, num_classes, 3, padding=d, dilation=d) for d in dilations]
        )

    def forward(self, x):
        out = self.branches[0](x)
        for branch in self.branches[1:]:
            out = out + branch(x)
        return out


class PooledLinearHead(nn.Module):
    def __init__(self, in_channels: int, num_classes: int):
        super().__init__()
        self.fc = nn.Linear(in_channels, num_classes)

    def forward(self, x):
        return self.fc(x.mean(dim=(2, 3)))


class SegmentationModel(nn.Module):
    def __init__(self, backbone: ResidualBackbone, head: DilatedSegHead):
        super().__init__()
        self.backbone = backbone
        self.head = head

    def forward(self, x):
        logits = self.head(self.backbone(x))
        return F.interpolate(logits, size=x.shape[-2:], mode="bilinear", align_corners=False)


class ClassificationModel(nn.Module):
    def __init__(self, backbone: ResidualBackbone, head: PooledLinearHead):
        super().__init__()
        self.backbone = backbone
        self.head = head

    def forward(self, x):
        return self.head(self.backbone(x))


def init_parameters(model: nn.Module, seed: int) -> nn.Module:
    """Fan-in-scaled normal weights, zero biases, unit norm gains; each
    parameter gets its own stream keyed by (seed, name)."""
    with torch.no_grad():
        for name, p in model.named_parameters():
            if p.ndim >= 2:
                fan_in = p.shape[1]
                for s in p.shape[2:]:
                    fan_in *= s
                rng = derived_rng(seed, "init", name)
                w = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=tuple(p.shape))
                p.copy_(torch.from_numpy(w).to(p.dtype))
            elif name.endswith("bias"):
                p.zero_()
            else:  # normalization gain
                p.fill_(1.0)
    return model


def build_backbone(config: ModelConfig, seed: int) -> ResidualBackbone:
    config.validate()
    preset = get_preset(config.backbone_preset)
    backbone = ResidualBackbone(preset, config.input_channels, output_stride=None)
    return init_parameters(backbone, seed)


def build_segmentation_model(config: ModelConfig, seed: int) -> SegmentationModel:
    config.validate()
    if config.head != "segmentation":
        raise ConfigError(f"config head is {config.head!r}, expected 'segmentation'")
    preset = get_preset(config.backbone_preset)
    backbone = ResidualBackbone(preset, config.input_channels, output_stride=config.seg_output_stride)
    head = DilatedSegHead(preset.out_channels, config.num_classes, tuple(config.head_dilations))
    return init_parameters(SegmentationModel(backbone, head), seed)


def build_classification_model(config: ModelConfig, seed: int) -> ClassificationModel:
    config.validate()
    if config.head != "classification":
        raise ConfigError(f"config head is {config.head!r}, expected 'classification'")
    preset = get_preset(config.backbone_preset)
    backbone = ResidualBackbone(preset, config.input_channels, output_stride=None)
    head = PooledLinearHead(preset.out_channels, config.num_classes)
    return init_parameters(ClassificationModel(backbone, head), seed)


def build_model(config: ModelConfig, seed: int) -> nn.Module:
    if config.head == "segmentation":
        return build_segmentation_model(config, seed)
    return build_classification_model(config, seed)
