/* Copyright 2026 the bcosb authors */
/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

namespace bcosb {

inline constexpr int kVersionMajor = 1;
inline constexpr int kVersionMinor = 0;
inline constexpr int kVersionPatch = 0;
inline constexpr const char* kVersionString = "1.0.0";

}  // namespace bcosb
