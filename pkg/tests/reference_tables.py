"""Striated-model crossing estimates used as fit input.

Columns: r, r0, pi_h simulated, pi_h from the exact formula, pi_v simulated, pi_v exact.
"""

STRIATED_TABLE = (
    (0.6070, 0.3873, 0.9058, 0.9045, 0.0965, 0.0955),
    (0.6400, 0.4116, 0.8885, 0.8880, 0.1146, 0.1120),
    (0.6721, 0.4356, 0.8716, 0.8711, 0.1302, 0.1289),
    (0.7059, 0.4613, 0.8546, 0.8527, 0.1492, 0.1473),
    (0.7414, 0.4887, 0.8344, 0.8327, 0.1699, 0.1673),
    (0.7753, 0.5153, 0.8147, 0.8131, 0.1881, 0.1869),
    (0.8190, 0.5502, 0.7891, 0.7874, 0.2148, 0.2126),
    (0.8611, 0.5845, 0.7641, 0.7623, 0.2388, 0.2377),
    (0.9048, 0.6206, 0.7378, 0.7361, 0.2672, 0.2639),
    (0.9512, 0.6599, 0.7114, 0.7083, 0.2933, 0.2917),
    (1.000, 0.7018, 0.6801, 0.6793, 0.3228, 0.3207),
    (1.051, 0.7467, 0.6521, 0.6492, 0.3534, 0.3508),
    (1.105, 0.7948, 0.6210, 0.6181, 0.3832, 0.3819),
    (1.161, 0.8457, 0.5893, 0.5867, 0.4145, 0.4133),
    (1.221, 0.9007, 0.5562, 0.5543, 0.4458, 0.4457),
    (1.290, 0.9651, 0.5188, 0.5185, 0.4816, 0.4815),
    (1.349, 1.021, 0.4909, 0.4891, 0.5133, 0.5109),
    (1.417, 1.086, 0.4594, 0.4570, 0.5455, 0.5430),
    (1.488, 1.155, 0.4271, 0.4252, 0.5770, 0.5748),
    (1.562, 1.229, 0.3957, 0.3938, 0.6086, 0.6062),
    (1.647, 1.313, 0.3606, 0.3607, 0.6396, 0.6393),
    (1.730, 1.395, 0.3302, 0.3309, 0.6692, 0.6691),
    (1.824, 1.490, 0.3003, 0.2998, 0.7008, 0.7002),
    (1.910, 1.576, 0.2750, 0.2738, 0.7277, 0.7262),
    (2.014, 1.681, 0.2463, 0.2453, 0.7546, 0.7547),
    (2.124, 1.792, 0.2204, 0.2183, 0.7836, 0.7817),
    (2.224, 1.894, 0.1961, 0.1963, 0.8059, 0.8037),
    (2.336, 2.008, 0.1758, 0.1742, 0.8277, 0.8258),
    (2.453, 2.127, 0.1538, 0.1538, 0.8477, 0.8462),
    (2.597, 2.274, 0.1326, 0.1319, 0.8695, 0.8681),
    (2.727, 2.407, 0.1159, 0.1147, 0.8855, 0.8853),
    (2.864, 2.547, 0.0990, 0.0991, 0.9010, 0.9009),
    (3.017, 2.703, 0.0846, 0.0842, 0.9158, 0.9159),
    (3.142, 2.830, 0.0744, 0.0737, 0.9269, 0.9263),
    (3.309, 3.001, 0.0618, 0.0616, 0.9396, 0.9384),
    (3.495, 3.191, 0.0512, 0.0505, 0.9497, 0.9495),
    (3.683, 3.382, 0.0410, 0.0413, 0.9590, 0.9587),
    (3.853, 3.556, 0.0346, 0.0344, 0.9661, 0.9656),
    (4.071, 3.778, 0.0279, 0.0273, 0.9734, 0.9727),
    (4.258, 3.969, 0.0230, 0.0223, 0.9780, 0.9777),
    (4.500, 4.217, 0.0174, 0.0172, 0.9830, 0.9828),
)
