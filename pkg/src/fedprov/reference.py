"""Published benchmark results, embedded as reference annotations.

The original study's numbers come from private clinical data and are not
reproducible from synthetic cohorts; reports print them beside the
synthetic-run values for qualitative, side-by-side reading. They are never
asserted in tests.

Keys: (family, source, strategy) for the global-test tables, plus
(family, source, strategy, test_set) for the cross-region tables.
Global values are (auc, f1, precision, recall); cross values are (auc, f1).
"""

REFERENCE_GLOBAL: dict[tuple[str, str, str], tuple[float, float, float, float]] = {
    # logistic regression, global test set
    ("logistic", "AB", "none"): (0.8702, 0.8194, 0.8856, 0.7625),
    ("logistic", "AB", "downsample"): (0.8827, 0.7275, 0.6148, 0.8906),
    ("logistic", "BC", "none"): (0.8315, 0.7730, 0.8934, 0.6812),
    ("logistic", "BC", "downsample"): (0.8806, 0.7296, 0.6225, 0.8812),
    ("logistic", "MB", "none"): (0.8579, 0.8125, 0.9140, 0.7312),
    ("logistic", "MB", "downsample"): (0.8754, 0.7462, 0.6679, 0.8453),
    ("logistic", "NL", "none"): (0.8241, 0.7579, 0.8719, 0.6703),
    ("logistic", "NL", "downsample"): (0.8702, 0.6937, 0.5668, 0.8937),
    ("logistic", "NS", "none"): (0.8696, 0.8092, 0.8541, 0.7687),
    ("logistic", "NS", "downsample"): (0.8368, 0.6264, 0.4850, 0.8843),
    ("logistic", "ON", "none"): (0.8703, 0.8262, 0.9082, 0.7578),
    ("logistic", "ON", "downsample"): (0.8878, 0.7729, 0.7043, 0.8562),
    ("logistic", "QC", "none"): (0.8728, 0.7276, 0.6317, 0.8578),
    ("logistic", "QC", "downsample"): (0.8288, 0.6013, 0.4499, 0.9062),
    ("logistic", "CML", "none"): (0.8686, 0.8217, 0.8996, 0.7562),
    ("logistic", "CML", "downsample"): (0.8909, 0.7657, 0.6817, 0.8734),
    ("logistic", "FL", "none"): (0.7388, 0.6211, 0.8075, 0.5046),
    ("logistic", "FL", "downsample"): (0.8134, 0.6041, 0.4730, 0.8359),
    # MLP, global test set
    ("mlp", "AB", "none"): (0.8379, 0.7195, 0.6901, 0.7515),
    ("mlp", "AB", "downsample"): (0.8411, 0.6527, 0.5285, 0.8531),
    ("mlp", "BC", "none"): (0.8167, 0.6942, 0.6812, 0.7078),
    ("mlp", "BC", "downsample"): (0.8228, 0.6173, 0.4856, 0.8468),
    ("mlp", "MB", "none"): (0.8348, 0.7453, 0.7775, 0.7156),
    ("mlp", "MB", "downsample"): (0.8371, 0.6540, 0.5371, 0.8359),
    ("mlp", "NL", "none"): (0.7250, 0.5786, 0.6807, 0.5031),
    ("mlp", "NL", "downsample"): (0.7817, 0.5376, 0.3889, 0.8703),
    ("mlp", "NS", "none"): (0.8431, 0.7298, 0.7039, 0.7578),
    ("mlp", "NS", "downsample"): (0.8102, 0.5897, 0.4502, 0.8546),
    ("mlp", "ON", "none"): (0.8568, 0.7827, 0.8166, 0.7515),
    ("mlp", "ON", "downsample"): (0.8559, 0.6789, 0.5591, 0.8640),
    ("mlp", "QC", "none"): (0.8175, 0.6376, 0.5349, 0.7890),
    ("mlp", "QC", "downsample"): (0.8038, 0.5777, 0.4359, 0.8562),
    ("mlp", "CML", "none"): (0.8499, 0.7759, 0.8205, 0.7359),
    ("mlp", "CML", "downsample"): (0.8496, 0.6741, 0.5585, 0.8500),
    ("mlp", "FL", "none"): (0.8665, 0.8176, 0.8942, 0.7531),
    ("mlp", "FL", "downsample"): (0.8808, 0.7380, 0.6399, 0.8718),
}

REFERENCE_CROSS: dict[tuple[str, str, str, str], tuple[float, float]] = {
    # logistic regression on the less-sampled regions' test sets
    ("logistic", "AB", "none", "BC"): (0.7569, 0.6500),
    ("logistic", "AB", "none", "MB"): (0.8786, 0.8318),
    ("logistic", "AB", "none", "NS"): (0.9099, 0.8857),
    ("logistic", "AB", "none", "QC"): (0.7500, 0.6667),
    ("logistic", "AB", "downsample", "BC"): (0.8078, 0.6667),
    ("logistic", "AB", "downsample", "MB"): (0.8913, 0.7659),
    ("logistic", "AB", "downsample", "NS"): (0.9060, 0.8045),
    ("logistic", "AB", "downsample", "QC"): (0.7115, 0.6086),
    ("logistic", "ON", "none", "BC"): (0.7569, 0.6500),
    ("logistic", "ON", "none", "MB"): (0.8786, 0.8318),
    ("logistic", "ON", "none", "NS"): (0.8918, 0.8787),
    ("logistic", "ON", "none", "QC"): (0.7692, 0.7000),
    ("logistic", "ON", "downsample", "BC"): (0.7800, 0.6521),
    ("logistic", "ON", "downsample", "MB"): (0.8920, 0.7938),
    ("logistic", "ON", "downsample", "NS"): (0.9103, 0.8292),
    ("logistic", "ON", "downsample", "QC"): (0.7307, 0.6364),
    ("logistic", "CML", "none", "BC"): (0.7569, 0.6500),
    ("logistic", "CML", "none", "MB"): (0.8786, 0.8318),
    ("logistic", "CML", "none", "NS"): (0.8874, 0.8656),
    ("logistic", "CML", "none", "QC"): (0.7692, 0.7000),
    ("logistic", "CML", "downsample", "BC"): (0.7800, 0.6521),
    ("logistic", "CML", "downsample", "MB"): (0.8960, 0.7910),
    ("logistic", "CML", "downsample", "NS"): (0.9104, 0.8139),
    ("logistic", "CML", "downsample", "QC"): (0.7307, 0.6364),
    ("logistic", "FL", "none", "BC"): (0.6064, 0.3529),
    ("logistic", "FL", "none", "MB"): (0.7786, 0.6930),
    ("logistic", "FL", "none", "NS"): (0.7433, 0.6440),
    ("logistic", "FL", "none", "QC"): (0.7307, 0.6315),
    ("logistic", "FL", "downsample", "BC"): (0.8101, 0.6428),
    ("logistic", "FL", "downsample", "MB"): (0.8184, 0.6375),
    ("logistic", "FL", "downsample", "NS"): (0.8432, 0.7096),
    ("logistic", "FL", "downsample", "QC"): (0.7115, 0.6153),
    # MLP on the less-sampled regions' test sets
    ("mlp", "AB", "none", "BC"): (0.7569, 0.6500),
    ("mlp", "AB", "none", "MB"): (0.8670, 0.7656),
    ("mlp", "AB", "none", "NS"): (0.8608, 0.7654),
    ("mlp", "AB", "none", "QC"): (0.6730, 0.5454),
    ("mlp", "AB", "downsample", "BC"): (0.8032, 0.6538),
    ("mlp", "AB", "downsample", "MB"): (0.8485, 0.6887),
    ("mlp", "AB", "downsample", "NS"): (0.8297, 0.6956),
    ("mlp", "AB", "downsample", "QC"): (0.6153, 0.5000),
    ("mlp", "ON", "none", "BC"): (0.7685, 0.6511),
    ("mlp", "ON", "none", "MB"): (0.8992, 0.8474),
    ("mlp", "ON", "none", "NS"): (0.9011, 0.8421),
    ("mlp", "ON", "none", "QC"): (0.8076, 0.7500),
    ("mlp", "ON", "downsample", "BC"): (0.8032, 0.6538),
    ("mlp", "ON", "downsample", "MB"): (0.8764, 0.7412),
    ("mlp", "ON", "downsample", "NS"): (0.8521, 0.7252),
    ("mlp", "ON", "downsample", "QC"): (0.7500, 0.6667),
    ("mlp", "CML", "none", "BC"): (0.7361, 0.6153),
    ("mlp", "CML", "none", "MB"): (0.8677, 0.7966),
    ("mlp", "CML", "none", "NS"): (0.9099, 0.8857),
    ("mlp", "CML", "none", "QC"): (0.7115, 0.6000),
    ("mlp", "CML", "downsample", "BC"): (0.7476, 0.5660),
    ("mlp", "CML", "downsample", "MB"): (0.8800, 0.7284),
    ("mlp", "CML", "downsample", "NS"): (0.8835, 0.7727),
    ("mlp", "CML", "downsample", "QC"): (0.6153, 0.5161),
    ("mlp", "FL", "none", "BC"): (0.7569, 0.6500),
    ("mlp", "FL", "none", "MB"): (0.8807, 0.8392),
    ("mlp", "FL", "none", "NS"): (0.9144, 0.8985),
    ("mlp", "FL", "none", "QC"): (0.7115, 0.6000),
    ("mlp", "FL", "downsample", "BC"): (0.7916, 0.6530),
    ("mlp", "FL", "downsample", "MB"): (0.9126, 0.8088),
    ("mlp", "FL", "downsample", "NS"): (0.8700, 0.7586),
    ("mlp", "FL", "downsample", "QC"): (0.7115, 0.6086),
}
