//! Welch statistics computed with scipy.stats.ttest_ind(equal_var=False).

pub const WELCH_FIXTURES: [(&[f64], &[f64], f64, f64); 20] = [
    (&[90.47, 94.37, 91.93, 94.47, 90.4], &[83.6, 85.8, 87.8, 89.8, 90.4], 3.1302288658274344, 0.0159648639432872),
    (&[82.91, 89.75, 84.82, 90.31, 90.5], &[78.18, 82.37, 86.91, 90.02, 90.5], 0.7271299393629366, 0.49073177876756446),
    (&[90.0, 90.5, 89.5, 90.2, 89.8], &[80.0, 80.5, 79.5, 80.3, 79.7], 39.84095364447981, 1.9354713943716509e-10),
    (&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 4.0, 6.0, 8.0, 10.0], -1.8973665961010275, 0.10753119493062718),
    (&[1.0, 1.0, 1.0, 1.0, 2.0], &[1.0, 2.0, 3.0], -1.3093073414159544, 0.2981187105373021),
    (&[83.57, 89.65, 81.26, 87.44, 87.97, 88.67, 92.91, 83.48], &[79.65, 79.81, 80.38, 78.91], 5.171698306808167, 0.0009712586903216783),
    (&[24.48, 18.37, 31.32, 21.56, 33.47], &[26.76, 38.2, 26.92, 34.93, 25.36], -1.19348245357552, 0.2672562136003937),
    (&[60.35, 56.95, 57.22, 62.77, 61.0, 60.49, 58.41], &[80.32, 80.81], -24.812967973264566, 6.249761902306034e-08),
    (&[69.56, 70.19, 64.09, 62.5, 65.46, 62.22], &[86.9, 90.65, 84.16], -9.162668184522476, 0.0005287674336057469),
    (&[70.98, 78.08, 84.16, 75.57, 79.56, 78.43, 75.04, 82.47], &[30.24, 32.26], 25.97995060893367, 2.0552359896880566e-07),
    (&[73.46, 72.55, 71.53, 75.5, 73.23, 74.82, 74.3, 73.06], &[65.32, 63.38, 66.8, 68.99, 69.37, 75.48, 69.82, 67.6], 3.848082577929486, 0.004154460840054965),
    (&[93.05, 92.08], &[44.4, 46.46, 44.08, 48.49, 39.92, 42.21, 38.98, 44.7], 39.90175254386935, 2.0081833760734454e-10),
    (&[46.58, 49.97, 49.49, 49.61, 42.03, 39.03, 45.65, 49.26], &[30.81, 37.93], 3.148904220882949, 0.14205743118574643),
    (&[19.53, 20.03], &[27.77, 12.47, 35.64, 45.03, 18.83, 26.93, 34.09], -2.1626077053327615, 0.07348025964711695),
    (&[28.46, 28.89, 24.92, 26.37, 27.07], &[29.48, 32.52, 37.62, 29.83, 31.13, 35.93], -3.6407349755516707, 0.0074395865878693285),
    (&[72.89, 66.36, 58.66, 76.05, 76.29, 72.68, 73.69, 77.24], &[95.02, 91.76, 88.59, 89.08, 79.33, 72.63, 102.92], -3.826711049434744, 0.003424445673091987),
    (&[46.18, 45.46, 58.85, 54.97, 60.8], &[26.57, 26.78, 27.47, 28.96, 28.37], 7.980071437780866, 0.0011255536570111396),
    (&[82.96, 86.01, 82.73, 88.33, 85.16, 84.36, 81.65], &[82.69, 87.29, 86.23, 80.38, 85.63], 0.008568045801503834, 0.9933885375301545),
    (&[53.81, 56.15, 53.83, 54.38, 51.2, 59.53, 55.76, 53.21], &[63.25, 71.21, 64.18, 74.88, 76.55], -5.354848797498568, 0.003367997703939914),
    (&[60.09, 47.52], &[48.44, 42.52, 40.26, 51.28], 1.2057015354583764, 0.39832974971474594),
];
