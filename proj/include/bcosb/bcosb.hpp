/* Copyright 2026 the bcosb authors */
/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include "bcosb/battery.hpp"
#include "bcosb/channel.hpp"
#include "bcosb/config.hpp"
#include "bcosb/duality.hpp"
#include "bcosb/errors.hpp"
#include "bcosb/linalg.hpp"
#include "bcosb/rates.hpp"
#include "bcosb/report.hpp"
#include "bcosb/solver.hpp"
#include "bcosb/threading.hpp"
#include "bcosb/units.hpp"
#include "bcosb/version.hpp"
