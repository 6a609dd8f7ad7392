#pragma once

#include <string>

#include "ess/linear_program.hpp"
#include "ess/model.hpp"
#include "ess/mpec.hpp"

namespace ess {

// Fixed-format MPS. Rows and columns get generated 8-character names
// (R0000001, C0000001; objective OBJ) in registration order, numeric fields
// are at most 12 characters, integer columns sit between INTORG/INTEND
// markers, and the objective constant is written as minus the OBJ right-hand
// side. Output is a pure function of the model.
std::string to_mps(const MathModel& model, const std::string& name = "ESS");

void export_mps(const MathModel& model, const std::string& path, const std::string& name = "ESS");
void export_mps(const LinearProgram& lp, const std::string& path, const std::string& name = "ESS");
void export_mps(const MilpModel& milp, const std::string& path, const std::string& name = "ESS");

// Shortest decimal rendering of v that fits a 12-character MPS field.
std::string mps_number(double v);

}  // namespace ess
