/*
 * Copyright 2026 The ccagnn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#pragma once

#include "ccagnn/tensor.hpp"
#include "ccagnn/ops.hpp"
#include "ccagnn/random.hpp"
#include "ccagnn/parameters.hpp"
#include "ccagnn/grad_check.hpp"
#include "ccagnn/graph.hpp"
#include "ccagnn/bundle.hpp"
#include "ccagnn/folds.hpp"
#include "ccagnn/synthetic.hpp"
#include "ccagnn/layers/gat.hpp"
#include "ccagnn/layers/gate.hpp"
#include "ccagnn/layers/mi.hpp"
#include "ccagnn/augment.hpp"
#include "ccagnn/model.hpp"
#include "ccagnn/loss.hpp"
#include "ccagnn/training/adam.hpp"
#include "ccagnn/training/metrics.hpp"
#include "ccagnn/training/trainer.hpp"
#include "ccagnn/training/checkpoint.hpp"
#include "ccagnn/training/report.hpp"
#include "ccagnn/svg.hpp"
