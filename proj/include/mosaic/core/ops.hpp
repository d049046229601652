#pragma once

#include "mosaic/core/ops_basic.hpp"
#include "mosaic/core/ops_conv.hpp"
#include "mosaic/core/ops_loss.hpp"
