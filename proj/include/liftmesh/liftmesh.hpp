/*
 * Copyright 2026 The liftmesh Authors
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

#include "liftmesh/body_model.hpp"
#include "liftmesh/camera.hpp"
#include "liftmesh/core/error.hpp"
#include "liftmesh/core/grad_check.hpp"
#include "liftmesh/core/ops.hpp"
#include "liftmesh/core/rng.hpp"
#include "liftmesh/core/tape.hpp"
#include "liftmesh/core/tensor.hpp"
#include "liftmesh/graph_transformer.hpp"
#include "liftmesh/io/checkpoint.hpp"
#include "liftmesh/io/config.hpp"
#include "liftmesh/io/mesh_io.hpp"
#include "liftmesh/io/model_io.hpp"
#include "liftmesh/io/pose_file.hpp"
#include "liftmesh/io/synth_io.hpp"
#include "liftmesh/lifter.hpp"
#include "liftmesh/metrics.hpp"
#include "liftmesh/pose_shape_estimator.hpp"
#include "liftmesh/skeleton.hpp"
#include "liftmesh/training.hpp"
