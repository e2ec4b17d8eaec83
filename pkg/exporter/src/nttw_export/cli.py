"""`export_weights`: one-shot checkpoint conversion."""

import argparse
import sys

from .errors import ExportError
from .vgg19 import export, vgg19_manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="export_weights",
        description="Convert a pretrained VGG19 checkpoint to an NTTW file.",
    )
    parser.add_argument("--arch", choices=("vgg19",), required=True)
    parser.add_argument("--out", required=True, help="output .nttw path")
    parser.add_argument("--through", default="relu5_1",
                        help="deepest tap the engine will need")
    parser.add_argument("--checkpoint",
                        help="local .pth state dict; omitted, torchvision's "
                             "pretrained weights are fetched")
    args = parser.parse_args(argv)

    try:
        import torch
        if args.checkpoint:
            state = torch.load(args.checkpoint, map_location="cpu", weights_only=True)
            if isinstance(state, dict) and "state_dict" in state:
                state = state["state_dict"]
            source = args.checkpoint
        else:
            from torchvision.models import VGG19_Weights, vgg19
            state = vgg19(weights=VGG19_Weights.IMAGENET1K_V1).state_dict()
            source = "torchvision/vgg19-imagenet"
        manifest = vgg19_manifest(args.out, through=args.through, source=source)
        export(manifest, state)
    except (ExportError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    print("wrote %s from %s (through %s)" % (args.out, source, args.through),
          file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
