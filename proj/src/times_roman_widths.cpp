// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

// Advance widths (1/1000 em) of the standard Times-Roman font for printable
// ASCII and the Latin-1 supplement, from the Adobe core-14 AFM metrics.

#include "times_roman_widths.hpp"

namespace lenforge::metrics::detail {

const std::array<GlyphWidth, 191> kTimesRomanWidths = {{
    {0x20, 250}, {0x21, 333}, {0x22, 408}, {0x23, 500}, {0x24, 500}, {0x25, 833}, {0x26, 778},
    {0x27, 180}, {0x28, 333}, {0x29, 333}, {0x2A, 500}, {0x2B, 564}, {0x2C, 250}, {0x2D, 333},
    {0x2E, 250}, {0x2F, 278}, {0x30, 500}, {0x31, 500}, {0x32, 500}, {0x33, 500}, {0x34, 500},
    {0x35, 500}, {0x36, 500}, {0x37, 500}, {0x38, 500}, {0x39, 500}, {0x3A, 278}, {0x3B, 278},
    {0x3C, 564}, {0x3D, 564}, {0x3E, 564}, {0x3F, 444}, {0x40, 921}, {0x41, 722}, {0x42, 667},
    {0x43, 667}, {0x44, 722}, {0x45, 611}, {0x46, 556}, {0x47, 722}, {0x48, 722}, {0x49, 333},
    {0x4A, 389}, {0x4B, 722}, {0x4C, 611}, {0x4D, 889}, {0x4E, 722}, {0x4F, 722}, {0x50, 556},
    {0x51, 722}, {0x52, 667}, {0x53, 556}, {0x54, 611}, {0x55, 722}, {0x56, 722}, {0x57, 944},
    {0x58, 722}, {0x59, 722}, {0x5A, 611}, {0x5B, 333}, {0x5C, 278}, {0x5D, 333}, {0x5E, 469},
    {0x5F, 500}, {0x60, 333}, {0x61, 444}, {0x62, 500}, {0x63, 444}, {0x64, 500}, {0x65, 444},
    {0x66, 333}, {0x67, 500}, {0x68, 500}, {0x69, 278}, {0x6A, 278}, {0x6B, 500}, {0x6C, 278},
    {0x6D, 778}, {0x6E, 500}, {0x6F, 500}, {0x70, 500}, {0x71, 500}, {0x72, 333}, {0x73, 389},
    {0x74, 278}, {0x75, 500}, {0x76, 500}, {0x77, 722}, {0x78, 500}, {0x79, 500}, {0x7A, 444},
    {0x7B, 480}, {0x7C, 200}, {0x7D, 480}, {0x7E, 541}, {0xA0, 250}, {0xA1, 333}, {0xA2, 500},
    {0xA3, 500}, {0xA4, 500}, {0xA5, 500}, {0xA6, 200}, {0xA7, 500}, {0xA8, 333}, {0xA9, 760},
    {0xAA, 276}, {0xAB, 500}, {0xAC, 564}, {0xAD, 333}, {0xAE, 760}, {0xAF, 333}, {0xB0, 400},
    {0xB1, 564}, {0xB2, 300}, {0xB3, 300}, {0xB4, 333}, {0xB5, 500}, {0xB6, 453}, {0xB7, 250},
    {0xB8, 333}, {0xB9, 300}, {0xBA, 310}, {0xBB, 500}, {0xBC, 750}, {0xBD, 750}, {0xBE, 750},
    {0xBF, 444}, {0xC0, 722}, {0xC1, 722}, {0xC2, 722}, {0xC3, 722}, {0xC4, 722}, {0xC5, 722},
    {0xC6, 889}, {0xC7, 667}, {0xC8, 611}, {0xC9, 611}, {0xCA, 611}, {0xCB, 611}, {0xCC, 333},
    {0xCD, 333}, {0xCE, 333}, {0xCF, 333}, {0xD0, 722}, {0xD1, 722}, {0xD2, 722}, {0xD3, 722},
    {0xD4, 722}, {0xD5, 722}, {0xD6, 722}, {0xD7, 564}, {0xD8, 722}, {0xD9, 722}, {0xDA, 722},
    {0xDB, 722}, {0xDC, 722}, {0xDD, 722}, {0xDE, 556}, {0xDF, 500}, {0xE0, 444}, {0xE1, 444},
    {0xE2, 444}, {0xE3, 444}, {0xE4, 444}, {0xE5, 444}, {0xE6, 667}, {0xE7, 444}, {0xE8, 444},
    {0xE9, 444}, {0xEA, 444}, {0xEB, 444}, {0xEC, 278}, {0xED, 278}, {0xEE, 278}, {0xEF, 278},
    {0xF0, 500}, {0xF1, 500}, {0xF2, 500}, {0xF3, 500}, {0xF4, 500}, {0xF5, 500}, {0xF6, 500},
    {0xF7, 564}, {0xF8, 500}, {0xF9, 500}, {0xFA, 500}, {0xFB, 500}, {0xFC, 500}, {0xFD, 500},
    {0xFE, 500}, {0xFF, 500},
}};

}  // namespace lenforge::metrics::detail
