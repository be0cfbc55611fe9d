"""echoseg: unsupervised fast-motion segmentation of grayscale video.

A video is decomposed into a learned low-rank background and a sparse
fast-motion signal via neural matrix factorization; the dominant fast-moving
structure is then localized with a sliding-window scan of a motion-saliency
volume and segmented by diffusion, thresholding and morphology.
"""

__version__ = "0.1.0"
