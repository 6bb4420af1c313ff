#pragma once

#include "mevt/template_memory.hpp"
#include "mevt/vim_block.hpp"

#include <span>

namespace mevt {

// shared: the memory network reuses the backbone parameters.
// separate: it owns an independent stack of the same architecture.
enum class MemoryMode { shared, separate };

// Concatenates the templates (oldest first) into an (m * N_z) x C sequence,
// runs the stack and keeps the last N_z output rows.
MatrixF fuse(std::span<const TemplateFeature> templates, const BackboneParams& params);

struct DynamicTemplate {
  MatrixF tokens;  // N_z x C
  Library routed = Library::short_term;
};

// Routes `incoming` to LT or ST and fuses the selected store.
DynamicTemplate generate_dynamic_template(const MemoryLibrary& lib, const TemplateFeature& incoming,
                                          const BackboneParams& params);

}  // namespace mevt
