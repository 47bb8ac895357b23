#pragma once

#include "emo/autodiff.hpp"
#include "emo/baseline.hpp"
#include "emo/data.hpp"
#include "emo/explain.hpp"
#include "emo/fusion.hpp"
#include "emo/layers.hpp"
#include "emo/metrics.hpp"
#include "emo/model.hpp"
#include "emo/preprocess.hpp"
#include "emo/train.hpp"
