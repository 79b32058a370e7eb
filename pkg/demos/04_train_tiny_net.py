"""
Training the toy network
========================

A small numpy convolutional net learns to segment synthetic radargrams.
The background fades with depth, which gives the net's 5x5 view a cue for
which layer it is looking at. Takes a few seconds.
"""
from layerkit import aggregate, evaluate, preprocess, tinyseg
from layerkit.synth import SynthConfig, generate_corpus
from layerkit.tinyseg import TrainConfig

cfg = SynthConfig(height=64, width=64, num_layers=4, mean_spacing_px=10, spacing_jitter=0.1,
                  undulation_amplitude_px=1.0, undulation_wavelength_px=64.0, contrast_decay=0.8,
                  noise_level=0.05, perturbation_rate=0.0, annotation_dropout=0.0,
                  depth_attenuation=3.0, seed=0)
corpus = [(c.image, sem) for img, full, _ in generate_corpus(cfg, 64) for c, sem in preprocess(img, full)]
print(len(corpus), "training crops of shape", corpus[0][0].pixels.shape)


def mae(net):
    return aggregate([evaluate(tinyseg.predict(net, x), y) for x, y in corpus]).thickness_mae_px


net = tinyseg.init(28, seed=0)
print(f"untrained thickness MAE: {mae(net):.2f} px")


def log(step, loss, lr, momentum):
    if step % 40 == 0 or step == 199:
        print(f"  step {step:3d} loss {loss:.3f} lr {lr:.4f}")


net, history = tinyseg.train(net, corpus, TrainConfig(base_lr=0.05, epochs=25), log=log)
print(f"trained thickness MAE:   {mae(net):.2f} px after {len(history)} steps")
