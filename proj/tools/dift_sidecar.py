#!/usr/bin/env python3
"""Reference denoiser sidecar for `dift --backend http://host:port`.

Routes:
  GET  /config   -> {"id", "alpha_bar": [T], "num_blocks"}
  POST /encode   {"image": H x W x 3 float32 in [0, 1]} -> {"latent": C x H x W float64}
  POST /forward  {"t", "prompt", "inputs": [C x H x W float64, ...]}
                 -> {"outputs": [[C x h x w float32 per block] per input]}

Arrays travel as {"shape", "dtype", "data"} with little-endian base64 data.
Noise is drawn by the caller; forward() must be deterministic.

Models:
  toy  numpy port of the built-in toy-v1 backend (protocol checks, no weights)
  sd   Stable Diffusion via diffusers; block n is the output of up_blocks[n]
"""

import argparse
import base64
import json
import sys
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np


def to_wire(a):
    a = np.ascontiguousarray(a)
    dtype = {np.dtype("float32"): "float32", np.dtype("float64"): "float64"}[a.dtype]
    return {
        "shape": list(a.shape),
        "dtype": dtype,
        "data": base64.b64encode(a.astype(a.dtype.newbyteorder("<")).tobytes()).decode("ascii"),
    }


def from_wire(j):
    dtype = {"float32": "<f4", "float64": "<f8"}[j["dtype"]]
    return np.frombuffer(base64.b64decode(j["data"]), dtype=dtype).reshape(j["shape"])


class ToyModel:
    LATENT_GAIN = 50.0
    GRADIENT_GAIN = 4.0
    POSITION_WEIGHT = 0.05
    BLOCKS = 4

    def __init__(self):
        betas = 1e-4 + (0.02 - 1e-4) * np.arange(1000) / 999.0
        self.alpha_bar = np.cumprod(1.0 - betas)
        self.id = "toy-v1"

    def encode(self, image):
        return (self.LATENT_GAIN * (2.0 * image.astype(np.float64) - 1.0)).transpose(2, 0, 1)

    def _block(self, latent, n):
        _, H, W = latent.shape
        s = 2 ** (n + 1)
        gh, gw = max(1, H // s), max(1, W // s)
        lum = 0.299 * latent[0] + 0.587 * latent[1] + 0.114 * latent[2]
        gx = lum[:, np.r_[1:W, W - 1]] - lum
        gy = lum[np.r_[1:H, H - 1], :] - lum
        out = np.zeros((9, gh, gw), dtype=np.float32)
        for i in range(gh):
            y0, y1 = i * H // gh, (i + 1) * H // gh
            for j in range(gw):
                x0, x1 = j * W // gw, (j + 1) * W // gw
                scale = 1.0 / ((y1 - y0) * (x1 - x0) * self.LATENT_GAIN)
                out[0:3, i, j] = latent[:, y0:y1, x0:x1].sum(axis=(1, 2)) * scale
                out[3, i, j] = self.GRADIENT_GAIN * gx[y0:y1, x0:x1].sum() * scale
                out[4, i, j] = self.GRADIENT_GAIN * gy[y0:y1, x0:x1].sum() * scale
                u = 2.0 * np.pi * (j + 0.5) / gw
                v = 2.0 * np.pi * (i + 0.5) / gh
                out[5:9, i, j] = self.POSITION_WEIGHT * np.array([np.sin(u), np.cos(u), np.sin(v), np.cos(v)])
        return out

    def forward(self, inputs, t, prompt):
        if not 0 <= t < len(self.alpha_bar):
            raise ValueError("time step out of range")
        return [[self._block(x, n) for n in range(self.BLOCKS)] for x in inputs]


class StableDiffusionModel:
    def __init__(self, model_id, image_size, device):
        import torch
        from diffusers import DDPMScheduler, StableDiffusionPipeline

        self.torch = torch
        self.device = device
        self.image_size = image_size
        dtype = torch.float16 if device.startswith("cuda") else torch.float32
        pipe = StableDiffusionPipeline.from_pretrained(model_id, torch_dtype=dtype).to(device)
        self.vae, self.unet = pipe.vae, pipe.unet
        self.tokenizer, self.text_encoder = pipe.tokenizer, pipe.text_encoder
        self.dtype = dtype
        sched = DDPMScheduler.from_pretrained(model_id, subfolder="scheduler")
        self.alpha_bar = sched.alphas_cumprod.double().numpy()
        self.id = "sd:" + model_id
        self.BLOCKS = len(self.unet.up_blocks)
        self._captured = {}
        for n, block in enumerate(self.unet.up_blocks):
            block.register_forward_hook(lambda _m, _i, out, n=n: self._captured.__setitem__(n, out))

    def encode(self, image):
        torch = self.torch
        x = torch.from_numpy(image.astype(np.float32)).permute(2, 0, 1)[None]
        x = torch.nn.functional.interpolate(x, size=(self.image_size, self.image_size), mode="bilinear",
                                            align_corners=False)
        x = (2.0 * x - 1.0).to(self.device, self.dtype)
        with torch.no_grad():
            latent = self.vae.encode(x).latent_dist.mean * self.vae.config.scaling_factor
        return latent[0].double().cpu().numpy()

    def forward(self, inputs, t, prompt):
        torch = self.torch
        tokens = self.tokenizer([prompt], padding="max_length", max_length=self.tokenizer.model_max_length,
                                truncation=True, return_tensors="pt").input_ids.to(self.device)
        with torch.no_grad():
            text = self.text_encoder(tokens)[0]
            latents = torch.from_numpy(np.stack(inputs)).to(self.device, self.dtype)
            self._captured.clear()
            self.unet(latents, t, encoder_hidden_states=text.expand(len(inputs), -1, -1))
        blocks = [self._captured[n].float().cpu().numpy() for n in range(self.BLOCKS)]
        return [[blocks[n][k] for n in range(self.BLOCKS)] for k in range(len(inputs))]


def make_handler(model):
    class Handler(BaseHTTPRequestHandler):
        def _reply(self, status, body):
            data = json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _body(self):
            return json.loads(self.rfile.read(int(self.headers.get("Content-Length", 0))))

        def do_GET(self):
            if self.path != "/config":
                return self._reply(404, {"error": "unknown route " + self.path})
            self._reply(200, {"id": model.id, "alpha_bar": [float(a) for a in model.alpha_bar],
                              "num_blocks": model.BLOCKS})

        def do_POST(self):
            try:
                body = self._body()
                if self.path == "/encode":
                    latent = model.encode(from_wire(body["image"]))
                    return self._reply(200, {"latent": to_wire(latent.astype(np.float64))})
                if self.path == "/forward":
                    inputs = [from_wire(x) for x in body["inputs"]]
                    outputs = model.forward(inputs, int(body["t"]), body["prompt"])
                    return self._reply(200, {"outputs": [[to_wire(b.astype(np.float32)) for b in per_input]
                                                         for per_input in outputs]})
                self._reply(404, {"error": "unknown route " + self.path})
            except (KeyError, ValueError, TypeError) as e:
                self._reply(400, {"error": str(e)})

        def log_message(self, fmt, *args):
            pass

    return Handler


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--model", choices=["toy", "sd"], default="sd")
    p.add_argument("--model-id", default="stabilityai/stable-diffusion-2-1")
    p.add_argument("--image-size", type=int, default=768, help="side the image is resized to before encoding")
    p.add_argument("--device", default="cuda")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765, help="0 picks a free port")
    args = p.parse_args()

    model = ToyModel() if args.model == "toy" else StableDiffusionModel(args.model_id, args.image_size, args.device)
    server = HTTPServer((args.host, args.port), make_handler(model))
    print("listening on http://%s:%d" % (args.host, server.server_address[1]), flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
