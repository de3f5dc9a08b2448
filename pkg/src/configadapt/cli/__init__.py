from .ckptfile import load_checkpoint, save_checkpoint
