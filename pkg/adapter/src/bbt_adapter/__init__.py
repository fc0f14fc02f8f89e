"""Bridge between upstream pose/segmentation model dumps and the bbt
interchange formats, plus 2D embedding plots of exported feature tables."""
