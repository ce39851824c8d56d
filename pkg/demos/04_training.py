"""Training LAC-GAN, best-by-validation selection, checkpoints and resume."""

# %%
import tempfile
from pathlib import Path

from lacgan.checkpoint import load_checkpoint, save_checkpoint
from lacgan.data import generate_synthetic
from lacgan.train import TrainConfig, Trainer, evaluate, fit, prepare_data

data = prepare_data(generate_synthetic())
config = TrainConfig(method="lacgan", epochs=20, seed=0)

# %% Each epoch runs the Extractor phase, then alternating D and G steps.
trainer = Trainer(config, data)
for _ in range(10):
    rec = trainer.step_epoch()
    print(f"epoch {rec['epoch']:>2}  J_C {rec['j_c']:.3f}  J_S {rec['j_s']:.3f}  J_G {rec['j_g']:.3f}  "
          f"train {rec['train_acc']:.3f}  val {rec['val_acc']:.3f}")

# %% The full training state goes to disk and comes back bit-identical.
tmp = Path(tempfile.mkdtemp())
save_checkpoint(trainer.checkpoint(), tmp / "mid.ckpt")
_, resumed = fit(config, data, resume=load_checkpoint(tmp / "mid.ckpt"))
_, straight = fit(config, data)
print("resumed run equals uninterrupted run:", resumed == straight)

# %% The reported model is the epoch with the best validation accuracy.
print(f"best epoch {straight.best_epoch}, val {straight.best_val_acc:.3f}, test {straight.test_acc:.3f}")
trainer.run()
print("test accuracy of the last epoch instead:", round(evaluate(trainer.model, *data.test), 3))
