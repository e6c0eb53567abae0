"""Architecture zoo.

Five full feature backbones (vgg16, vgg19, resnet50, resnet101,
inception_v3) and three desk-scale variants (tiny_vgg, tiny_resnet,
tiny_inception), one per structural motif: plain sequential, skip-add,
branch-concat.

Tap ordinal conventions:
  vgg family        ordinal k = output of the k-th conv+relu unit
  resnet family     ordinal k = output of the k-th residual block
  inception family  ordinal k counts stem conv units individually, then modules

Full backbones register ordinals 1..10 with defaults content=2, style=8.
Tiny graphs have fewer units; their style default is their deepest tap.
"""

from typing import List

from .errors import ConfigurationError
from .graphs import ArchGraph, LayerSpec, TapRegistry


class _Builder:
    def __init__(self):
        self.layers: List[LayerSpec] = []

    def add(self, lid, kind, inputs, **params) -> str:
        if isinstance(inputs, str):
            inputs = (inputs,)
        self.layers.append(LayerSpec(id=lid, kind=kind, inputs=tuple(inputs), params=params))
        return lid

    def conv(self, lid, src, cin, cout, kernel, stride=1, pad=0, bias=True):
        return self.add(lid, "conv", src, in_channels=cin, out_channels=cout,
                        kernel=kernel, stride=stride, pad=pad, bias=bias)

    def conv_bn_relu(self, prefix, src, cin, cout, kernel, stride=1, pad=0, eps=1e-3):
        """BN-style conv unit: conv without bias, frozen-stats norm, relu."""
        c = self.conv(f"{prefix}_conv", src, cin, cout, kernel, stride, pad, bias=False)
        n = self.add(f"{prefix}_bn", "batchnorm", c, channels=cout, eps=eps)
        return self.add(f"{prefix}_relu", "relu", n)


# -------------------------------------------------------------------- vgg

_VGG16_PLAN = [64, 64, "M", 128, 128, "M", 256, 256, 256, "M",
               512, 512, 512, "M", 512, 512, 512, "M"]
_VGG19_PLAN = [64, 64, "M", 128, 128, "M", 256, 256, 256, 256, "M",
               512, 512, 512, 512, "M", 512, 512, 512, 512, "M"]


def _build_vgg(name, plan):
    b = _Builder()
    src = "input"
    cin = 3
    taps = {}
    unit = 0
    pool = 0
    for item in plan:
        if item == "M":
            pool += 1
            src = b.add(f"pool{pool}", "maxpool", src, window=2, stride=2, pad=0)
            continue
        unit += 1
        src = b.conv(f"conv{unit:02d}", src, cin, item, kernel=3, stride=1, pad=1, bias=True)
        src = b.add(f"relu{unit:02d}", "relu", src)
        if unit <= 10:
            taps[unit] = src
        cin = item
    registry = TapRegistry(ordinals=taps, content_default=2, style_defaults=(8,))
    return ArchGraph(name=name, layers=b.layers, taps=registry, min_input=64)


# ----------------------------------------------------------------- resnet

def _bottleneck(b, prefix, src, cin, width, stride):
    """1x1 reduce, 3x3 (carries the stride), 1x1 expand x4, projection shortcut."""
    cout = width * 4
    c1 = b.conv(f"{prefix}_c1", src, cin, width, kernel=1, bias=False)
    n1 = b.add(f"{prefix}_n1", "batchnorm", c1, channels=width, eps=1e-5)
    r1 = b.add(f"{prefix}_r1", "relu", n1)
    c2 = b.conv(f"{prefix}_c2", r1, width, width, kernel=3, stride=stride, pad=1, bias=False)
    n2 = b.add(f"{prefix}_n2", "batchnorm", c2, channels=width, eps=1e-5)
    r2 = b.add(f"{prefix}_r2", "relu", n2)
    c3 = b.conv(f"{prefix}_c3", r2, width, cout, kernel=1, bias=False)
    n3 = b.add(f"{prefix}_n3", "batchnorm", c3, channels=cout, eps=1e-5)
    shortcut = src
    if stride != 1 or cin != cout:
        dc = b.conv(f"{prefix}_dsc", src, cin, cout, kernel=1, stride=stride, bias=False)
        shortcut = b.add(f"{prefix}_dsn", "batchnorm", dc, channels=cout, eps=1e-5)
    s = b.add(f"{prefix}_add", "add", (n3, shortcut))
    out = b.add(f"{prefix}_out", "relu", s)
    return out, cout


def _build_resnet(name, stage_blocks):
    b = _Builder()
    src = b.conv("stem_conv", "input", 3, 64, kernel=7, stride=2, pad=3, bias=False)
    src = b.add("stem_bn", "batchnorm", src, channels=64, eps=1e-5)
    src = b.add("stem_relu", "relu", src)
    src = b.add("stem_pool", "maxpool", src, window=3, stride=2, pad=1)
    cin = 64
    taps = {}
    block = 0
    for stage, (width, count) in enumerate(zip((64, 128, 256, 512), stage_blocks)):
        for i in range(count):
            block += 1
            stride = 2 if (stage > 0 and i == 0) else 1
            src, cin = _bottleneck(b, f"b{block:02d}", src, cin, width, stride)
            if block <= 10:
                taps[block] = src
    registry = TapRegistry(ordinals=taps, content_default=2, style_defaults=(8,))
    return ArchGraph(name=name, layers=b.layers, taps=registry, min_input=64)


# -------------------------------------------------------------- inception

def _inception_a(b, m, src, cin, pool_features):
    b0 = b.conv_bn_relu(f"{m}_b0", src, cin, 64, kernel=1)
    b1 = b.conv_bn_relu(f"{m}_b1a", src, cin, 48, kernel=1)
    b1 = b.conv_bn_relu(f"{m}_b1b", b1, 48, 64, kernel=5, pad=2)
    b2 = b.conv_bn_relu(f"{m}_b2a", src, cin, 64, kernel=1)
    b2 = b.conv_bn_relu(f"{m}_b2b", b2, 64, 96, kernel=3, pad=1)
    b2 = b.conv_bn_relu(f"{m}_b2c", b2, 96, 96, kernel=3, pad=1)
    b3 = b.add(f"{m}_b3pool", "avgpool", src, window=3, stride=1, pad=1)
    b3 = b.conv_bn_relu(f"{m}_b3", b3, cin, pool_features, kernel=1)
    out = b.add(f"{m}_cat", "concat", (b0, b1, b2, b3))
    return out, 64 + 64 + 96 + pool_features


def _inception_b(b, m, src, cin):
    b0 = b.conv_bn_relu(f"{m}_b0", src, cin, 384, kernel=3, stride=2)
    b1 = b.conv_bn_relu(f"{m}_b1a", src, cin, 64, kernel=1)
    b1 = b.conv_bn_relu(f"{m}_b1b", b1, 64, 96, kernel=3, pad=1)
    b1 = b.conv_bn_relu(f"{m}_b1c", b1, 96, 96, kernel=3, stride=2)
    b2 = b.add(f"{m}_b2pool", "maxpool", src, window=3, stride=2, pad=0)
    out = b.add(f"{m}_cat", "concat", (b0, b1, b2))
    return out, 384 + 96 + cin


def _inception_c(b, m, src, cin, c7):
    b0 = b.conv_bn_relu(f"{m}_b0", src, cin, 192, kernel=1)
    b1 = b.conv_bn_relu(f"{m}_b1a", src, cin, c7, kernel=1)
    b1 = b.conv_bn_relu(f"{m}_b1b", b1, c7, c7, kernel=(1, 7), pad=(0, 3))
    b1 = b.conv_bn_relu(f"{m}_b1c", b1, c7, 192, kernel=(7, 1), pad=(3, 0))
    b2 = b.conv_bn_relu(f"{m}_b2a", src, cin, c7, kernel=1)
    b2 = b.conv_bn_relu(f"{m}_b2b", b2, c7, c7, kernel=(7, 1), pad=(3, 0))
    b2 = b.conv_bn_relu(f"{m}_b2c", b2, c7, c7, kernel=(1, 7), pad=(0, 3))
    b2 = b.conv_bn_relu(f"{m}_b2d", b2, c7, c7, kernel=(7, 1), pad=(3, 0))
    b2 = b.conv_bn_relu(f"{m}_b2e", b2, c7, 192, kernel=(1, 7), pad=(0, 3))
    b3 = b.add(f"{m}_b3pool", "avgpool", src, window=3, stride=1, pad=1)
    b3 = b.conv_bn_relu(f"{m}_b3", b3, cin, 192, kernel=1)
    out = b.add(f"{m}_cat", "concat", (b0, b1, b2, b3))
    return out, 768


def _inception_d(b, m, src, cin):
    b0 = b.conv_bn_relu(f"{m}_b0a", src, cin, 192, kernel=1)
    b0 = b.conv_bn_relu(f"{m}_b0b", b0, 192, 320, kernel=3, stride=2)
    b1 = b.conv_bn_relu(f"{m}_b1a", src, cin, 192, kernel=1)
    b1 = b.conv_bn_relu(f"{m}_b1b", b1, 192, 192, kernel=(1, 7), pad=(0, 3))
    b1 = b.conv_bn_relu(f"{m}_b1c", b1, 192, 192, kernel=(7, 1), pad=(3, 0))
    b1 = b.conv_bn_relu(f"{m}_b1d", b1, 192, 192, kernel=3, stride=2)
    b2 = b.add(f"{m}_b2pool", "maxpool", src, window=3, stride=2, pad=0)
    out = b.add(f"{m}_cat", "concat", (b0, b1, b2))
    return out, 320 + 192 + cin


def _inception_e(b, m, src, cin):
    b0 = b.conv_bn_relu(f"{m}_b0", src, cin, 320, kernel=1)
    b1 = b.conv_bn_relu(f"{m}_b1a", src, cin, 384, kernel=1)
    b1x = b.conv_bn_relu(f"{m}_b1w", b1, 384, 384, kernel=(1, 3), pad=(0, 1))
    b1y = b.conv_bn_relu(f"{m}_b1h", b1, 384, 384, kernel=(3, 1), pad=(1, 0))
    b1c = b.add(f"{m}_b1cat", "concat", (b1x, b1y))
    b2 = b.conv_bn_relu(f"{m}_b2a", src, cin, 448, kernel=1)
    b2 = b.conv_bn_relu(f"{m}_b2b", b2, 448, 384, kernel=3, pad=1)
    b2x = b.conv_bn_relu(f"{m}_b2w", b2, 384, 384, kernel=(1, 3), pad=(0, 1))
    b2y = b.conv_bn_relu(f"{m}_b2h", b2, 384, 384, kernel=(3, 1), pad=(1, 0))
    b2c = b.add(f"{m}_b2cat", "concat", (b2x, b2y))
    b3 = b.add(f"{m}_b3pool", "avgpool", src, window=3, stride=1, pad=1)
    b3 = b.conv_bn_relu(f"{m}_b3", b3, cin, 192, kernel=1)
    out = b.add(f"{m}_cat", "concat", (b0, b1c, b2c, b3))
    return out, 320 + 768 + 768 + 192


def _build_inception_v3():
    b = _Builder()
    taps = {}
    src = b.conv_bn_relu("stem1", "input", 3, 32, kernel=3, stride=2)
    taps[1] = src
    src = b.conv_bn_relu("stem2", src, 32, 32, kernel=3)
    taps[2] = src
    src = b.conv_bn_relu("stem3", src, 32, 64, kernel=3, pad=1)
    taps[3] = src
    src = b.add("stem_pool1", "maxpool", src, window=3, stride=2, pad=0)
    src = b.conv_bn_relu("stem4", src, 64, 80, kernel=1)
    taps[4] = src
    src = b.conv_bn_relu("stem5", src, 80, 192, kernel=3)
    taps[5] = src
    src = b.add("stem_pool2", "maxpool", src, window=3, stride=2, pad=0)

    cin = 192
    src, cin = _inception_a(b, "m01", src, cin, 32)
    taps[6] = src
    src, cin = _inception_a(b, "m02", src, cin, 64)
    taps[7] = src
    src, cin = _inception_a(b, "m03", src, cin, 64)
    taps[8] = src
    src, cin = _inception_b(b, "m04", src, cin)
    taps[9] = src
    src, cin = _inception_c(b, "m05", src, cin, 128)
    taps[10] = src
    src, cin = _inception_c(b, "m06", src, cin, 160)
    src, cin = _inception_c(b, "m07", src, cin, 160)
    src, cin = _inception_c(b, "m08", src, cin, 192)
    src, cin = _inception_d(b, "m09", src, cin)
    src, cin = _inception_e(b, "m10", src, cin)
    src, cin = _inception_e(b, "m11", src, cin)

    registry = TapRegistry(ordinals=taps, content_default=2, style_defaults=(8,))
    return ArchGraph(name="inception_v3", layers=b.layers, taps=registry, min_input=75)


# ------------------------------------------------------------ tiny graphs

def _build_tiny_vgg():
    b = _Builder()
    src = b.conv("conv1", "input", 3, 8, kernel=3, pad=1, bias=True)
    t1 = b.add("relu1", "relu", src)
    src = b.conv("conv2", t1, 8, 8, kernel=3, pad=1, bias=True)
    t2 = b.add("relu2", "relu", src)
    src = b.add("pool1", "maxpool", t2, window=2, stride=2, pad=0)
    src = b.conv("conv3", src, 8, 16, kernel=3, pad=1, bias=True)
    t3 = b.add("relu3", "relu", src)
    src = b.conv("conv4", t3, 16, 16, kernel=3, pad=1, bias=True)
    t4 = b.add("relu4", "relu", src)
    registry = TapRegistry(ordinals={1: t1, 2: t2, 3: t3, 4: t4},
                           content_default=2, style_defaults=(1, 2, 3, 4))
    return ArchGraph(name="tiny_vgg", layers=b.layers, taps=registry, min_input=8)


def _build_tiny_resnet():
    b = _Builder()
    src = b.conv_bn_relu("stem", "input", 3, 8, kernel=3, pad=1, eps=1e-5)
    taps = {}
    for i in (1, 2, 3):
        p = f"b{i}"
        c1 = b.conv(f"{p}_c1", src, 8, 8, kernel=3, pad=1, bias=False)
        n1 = b.add(f"{p}_n1", "batchnorm", c1, channels=8, eps=1e-5)
        r1 = b.add(f"{p}_r1", "relu", n1)
        c2 = b.conv(f"{p}_c2", r1, 8, 8, kernel=3, pad=1, bias=False)
        n2 = b.add(f"{p}_n2", "batchnorm", c2, channels=8, eps=1e-5)
        s = b.add(f"{p}_add", "add", (n2, src))
        src = b.add(f"{p}_out", "relu", s)
        taps[i] = src
    registry = TapRegistry(ordinals=taps, content_default=2, style_defaults=(1, 2, 3))
    return ArchGraph(name="tiny_resnet", layers=b.layers, taps=registry, min_input=8)


def _build_tiny_inception():
    b = _Builder()
    taps = {}
    src = b.conv_bn_relu("stem", "input", 3, 8, kernel=3, pad=1, eps=1e-3)
    taps[1] = src
    cin = 8
    for i, m in enumerate(("m1", "m2"), start=2):
        b0 = b.conv_bn_relu(f"{m}_b0", src, cin, 8, kernel=1)
        b1 = b.conv_bn_relu(f"{m}_b1", src, cin, 8, kernel=3, pad=1)
        src = b.add(f"{m}_cat", "concat", (b0, b1))
        cin = 16
        taps[i] = src
    registry = TapRegistry(ordinals=taps, content_default=2, style_defaults=(1, 2, 3))
    return ArchGraph(name="tiny_inception", layers=b.layers, taps=registry, min_input=8)


_BUILDERS = {
    "vgg16": lambda: _build_vgg("vgg16", _VGG16_PLAN),
    "vgg19": lambda: _build_vgg("vgg19", _VGG19_PLAN),
    "resnet50": lambda: _build_resnet("resnet50", (3, 4, 6, 3)),
    "resnet101": lambda: _build_resnet("resnet101", (3, 4, 23, 3)),
    "inception_v3": _build_inception_v3,
    "tiny_vgg": _build_tiny_vgg,
    "tiny_resnet": _build_tiny_resnet,
    "tiny_inception": _build_tiny_inception,
}

ARCH_NAMES = tuple(sorted(_BUILDERS))


def build_arch(name: str) -> ArchGraph:
    if name not in _BUILDERS:
        raise ConfigurationError(f"unknown architecture {name!r}; valid: {list(ARCH_NAMES)}")
    return _BUILDERS[name]()
