// Copyright (c) 2026 The foglift Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "foglift/camera.hpp"
#include "foglift/error.hpp"
#include "foglift/field.hpp"
#include "foglift/image.hpp"
#include "foglift/io.hpp"
#include "foglift/metrics.hpp"
#include "foglift/render.hpp"
#include "foglift/savgol.hpp"
#include "foglift/scenegen.hpp"
#include "foglift/threshold.hpp"
#include "foglift/train.hpp"
#include "foglift/vec.hpp"
