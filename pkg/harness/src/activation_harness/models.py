"""The two desk-scale CNN families.

Both expose forward_traces(x): the logits plus an ordered list of
(name, kind, tensor) traces — conv traces are post-activation (optionally
post-pooling), fc traces post-activation, and the final entry is the
logits. Network order, input side first.
"""

from torch import nn


def _act(name):
    return nn.Sigmoid() if name == "sigmoid" else nn.ReLU()


class LeNetLike(nn.Module):
    """Two 5x5 conv layers with 2x2 pooling, then two fully connected."""

    def __init__(self, conv_filters=(6, 12), activation="sigmoid", num_classes=10):
        super().__init__()
        c1, c2 = conv_filters
        self.conv1 = nn.Conv2d(1, c1, kernel_size=5)
        self.conv2 = nn.Conv2d(c1, c2, kernel_size=5)
        self.pool = nn.MaxPool2d(2)
        self.fc1 = nn.Linear(c2 * 4 * 4, 84)
        self.fc2 = nn.Linear(84, num_classes)
        self.act = _act(activation)

    def _conv_stage(self, name, h, post_pool, traces):
        # The traced tensor must sit on the loss path or backward leaves
        # its .grad unset, so pool exactly once.
        if post_pool:
            h = self.pool(h)
            traces.append((name, "conv", h))
        else:
            traces.append((name, "conv", h))
            h = self.pool(h)
        return h

    def forward_traces(self, x, post_pool=False):
        traces = []
        h = self._conv_stage("conv1", self.act(self.conv1(x)), post_pool, traces)
        h = self._conv_stage("conv2", self.act(self.conv2(h)), post_pool, traces)
        h = self.act(self.fc1(h.flatten(1)))
        traces.append(("fc1", "fc", h))
        logits = self.fc2(h)
        traces.append(("fc2", "fc", logits))
        return logits, traces

    def forward(self, x):
        logits, _ = self.forward_traces(x)
        return logits


class SmallAlexNetLike(nn.Module):
    """Four 3x3 conv layers with pooling, then three fully connected."""

    def __init__(
        self,
        conv_filters=(16, 32, 64, 128),
        fc_dims=(256, 128),
        activation="relu",
        num_classes=10,
    ):
        super().__init__()
        chans = [1] + list(conv_filters)
        self.convs = nn.ModuleList(
            nn.Conv2d(chans[i], chans[i + 1], kernel_size=3, padding=1)
            for i in range(4)
        )
        self.pool = nn.MaxPool2d(2)
        # 28 -> 14 -> 7 -> 3 -> 1 after four pools
        self.fc1 = nn.Linear(conv_filters[-1], fc_dims[0])
        self.fc2 = nn.Linear(fc_dims[0], fc_dims[1])
        self.fc3 = nn.Linear(fc_dims[1], num_classes)
        self.act = _act(activation)

    def forward_traces(self, x, post_pool=False):
        traces = []
        h = x
        for i, conv in enumerate(self.convs):
            h = self.act(conv(h))
            if post_pool:
                h = self.pool(h)
                traces.append((f"conv{i + 1}", "conv", h))
            else:
                traces.append((f"conv{i + 1}", "conv", h))
                h = self.pool(h)
        h = self.act(self.fc1(h.flatten(1)))
        traces.append(("fc1", "fc", h))
        h = self.act(self.fc2(h))
        traces.append(("fc2", "fc", h))
        logits = self.fc3(h)
        traces.append(("fc3", "fc", logits))
        return logits, traces

    def forward(self, x):
        logits, _ = self.forward_traces(x)
        return logits


def build_model(config, num_classes):
    if config.architecture == "lenet5-like":
        return LeNetLike(config.conv_filters, config.activation, num_classes)
    return SmallAlexNetLike(
        conv_filters=config.conv_filters,
        activation=config.activation,
        num_classes=num_classes,
    )
