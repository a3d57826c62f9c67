#pragma once

#include "littleyolo/anchor_set.hpp"
#include "littleyolo/anchors.hpp"
#include "littleyolo/annotations.hpp"
#include "littleyolo/boxmath.hpp"
#include "littleyolo/config.hpp"
#include "littleyolo/detect.hpp"
#include "littleyolo/error.hpp"
#include "littleyolo/eval.hpp"
#include "littleyolo/graph.hpp"
#include "littleyolo/image.hpp"
#include "littleyolo/parallel.hpp"
#include "littleyolo/splitmix.hpp"
#include "littleyolo/tensor.hpp"
#include "littleyolo/weights.hpp"
