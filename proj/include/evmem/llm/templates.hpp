#pragma once

#include <array>
#include <cctype>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "evmem/error.hpp"
#include "evmem/llm/provider.hpp"

namespace evmem {

namespace tmpl {

inline constexpr std::string_view kEventExtraction = "event_extraction";
inline constexpr std::string_view kRelationExtraction = "relation_extraction";
inline constexpr std::string_view kCoreference = "coreference";
inline constexpr std::string_view kActionDecision = "action_decision";
inline constexpr std::string_view kResponseGeneration = "response_generation";
inline constexpr std::string_view kQueryRefinement = "query_refinement";
inline constexpr std::string_view kNodeSelection = "node_selection";
inline constexpr std::string_view kClusterSelection = "cluster_selection";
inline constexpr std::string_view kPlanning = "planning";

// Placeholders are {name}; "{{" and "}}" produce literal braces.

inline constexpr std::string_view kEventExtractionText = R"(You are an expert information extraction system. Given a multi-turn dialog, extract meaningful events and output ONE strict JSON object.

Goals:
- Extract logically coherent events (E1, E2, ...) in chronological order. Each event represents a complete logical unit.
- AGGRESSIVELY COMBINE related micro-events into comprehensive summaries to avoid fragmentation. Merge events that:
  - Involve same participants discussing the same topic.
  - Form a logical sequence (decision + action + completion).
  - Are temporally close and thematically related (within 3-5 utterances).
  - Represent different aspects of the same situation/problem.
  - Include follow-up questions, clarifications, or elaborations.
- PRESERVE ALL important details within each merged event summary. Include:
  - Complete context and all key outcomes, results, and conclusions.
  - Specific facts, numbers, dates, locations, and concrete details.
  - Emotional states, reactions, and interpersonal dynamics.
  - Technical details, requirements, and specifications.
  - Any conditions, constraints, or limitations discussed.
  - IMPORTANT: Include visual content descriptions for shared images.
- Constraints: List people involved as an array `people` (max 3). Do not output other entity types or attributes.
- Event Count: Extract 6-10 comprehensive events. Prioritize fewer, more detailed events over many fragmented ones.

JSON SCHEMA:
{{"events": [{{"id": "E1", "summary": "...", "utterance_ids": ["..."], "time": "...", "people": ["..."]}}]}}

DIALOG:
{dialog}

RESPONSE FORMAT:
Output JSON only, no additional commentary.)";

inline constexpr std::string_view kRelationExtractionText = R"(You are an expert information extraction system. Given a list of extracted events from a dialog, identify meaningful pairwise relations between them and output ONE strict JSON object.

Goals:
- Consider ALL unordered pairs of events within the same session (not only adjacent events).
- Extract pairwise event relations with a SHORT, free-form label in `type` that best characterizes the link.
- Relation types can include: causal, motivation, enablement, follow_up, temporal_before, temporal_after, contrast, part_of, parallel, elaboration. These are examples, not a closed set.
- Add relations only when meaningful. Prefer specific semantic links over trivial temporal ordering.
- It is acceptable to have no temporal edges if they add no insight.

CRITICAL GUIDELINES:
- IMPORTANT: For temporal relations (follow_up, temporal_before, temporal_after), base them on the ACTUAL TIME when events occurred in the real world, NOT on when they are described in the dialog. Focus on the chronological sequence of reality.
- For each relation, cite minimal `evidence` utterance ids that support the linkage between the two events.

JSON SCHEMA:
{{"relations": [{{"source": "E1", "target": "E2", "type": "causal", "evidence": ["..."]}}]}}

EVENTS:
{events}

DIALOG:
{dialog}

RESPONSE FORMAT:
Output JSON only, no additional commentary.)";

inline constexpr std::string_view kCoreferenceText = R"(You are an expert at analyzing events and determining if they refer to the same real-world occurrence or have significant overlap.

Given two event descriptions extracted from different dialog sessions, determine:
- 1. Whether they describe the SAME event (same occurrence at the same time).
- 2. Whether they have SIGNIFICANT OVERLAP (mention or relate to the same real-world situation/topic).

Consider these factors:
- Do they involve the same people/participants?
- Do they describe the same actions, situations, or topics?
- Do they have compatible time references?
- Would merging their information create a more complete picture of ONE event?

EVENT A:
{event_a}

EVENT B:
{event_b}

Output a JSON object with these exact keys:
{{
  "same_event": boolean,            // true if they are the same event
  "has_overlap": boolean,           // true if they refer to the same situation
  "relation_type": string | null,   // suggest relation type if overlap
  "reasoning": string               // brief explanation
}})";

inline constexpr std::string_view kActionDecisionText = R"(You are an expert information evaluator. Your task is to decide which action to take for the current node based on how relevant and sufficient it is for answering the given question. You have THREE possible actions:

1. SKIP: The current node is NOT helpful for answering the question or satisfying any sub-goals.
- Use SKIP when the current node contains completely irrelevant information.
- The current node will be DISCARDED, not used in final answer.
- You should specify which neighbor node(s) to explore next, OR specify NONE if ALL neighbors are irrelevant.
- Multi-node selection rules: Maximum 3 nodes, only select HIGHLY relevant ones.

2. EXPAND: The current node IS helpful and helps satisfy some sub-goals, but NOT all sub-goals are satisfied yet.
- Use EXPAND when the current node contains useful information for one or more sub-goals.
- The current node will be KEPT and used in the final answer.
- Specify neighbor node(s) to explore next to satisfy remaining sub-goals, OR specify NONE if no neighbors are relevant.
- CRITICAL: You MUST indicate which sub-goals are now satisfied by this node + previously kept information. Only mark a sub-goal as satisfied if you have DIRECT evidence.

3. ANSWER: Use ONLY when ALL sub-goals are SATISFIED (or nearly all).
- Use ANSWER when the previously kept information + current node together satisfy ALL sub-goals.
- The current node will be KEPT and exploration will STOP.
- CRITICAL: You MUST list ALL satisfied sub-goals to confirm completeness.
- Be conservative: If ANY sub-goal remains unsatisfied, use EXPAND instead.

CRITICAL GUIDELINES:
- Check sub-goals systematically: For each action, explicitly evaluate which sub-goals are satisfied.
- ANSWER only when complete: Use ANSWER only when ALL (or all critical) sub-goals are satisfied.
- Navigate strategically: Choose next nodes that are likely to help satisfy remaining unsatisfied sub-goals.
- Be explicit about progress: Always indicate which sub-goals your current decision addresses.

RESPONSE FORMAT (follow strictly):
ACTION: [SKIP/EXPAND/ANSWER]
NEXT_NODES: [NODE_ID1, NODE_ID2, ...] (or NONE)
SATISFIED_SUBGOALS: [1, 3, 4] (REQUIRED for EXPAND/ANSWER; [] for SKIP)
REASONING: [Brief explanation: (1) info provided, (2) sub-goals satisfied, (3) sub-goals remaining, (4) why chosen next nodes target remaining sub-goals]

IMPORTANT: (1) For SKIP, SATISFIED_SUBGOALS must be []; (2) For EXPAND/ANSWER: provide list even if empty; (3) Only include sub-goals with DIRECT evidence; (4) Do NOT speculate.

QUESTION: {question}
{subgoals_text}

PREVIOUSLY KEPT INFORMATION:
{kept_nodes_info}

CURRENT NODE INFORMATION:
{current_info}

NEIGHBOR NODES (available for exploration):
{neighbor_info}

Now, make your decision:)";

inline constexpr std::string_view kResponseGenerationText = R"(Your task is to answer the QUESTION based on the provided CONTEXT.

Requirements:
- Be concise and direct: Provide ONLY the answer in the form of a short phrase, not a sentence. No explanations or additional commentary.
- Original wording: If the context contains direct statements that answer the question, use the original wording from the context.
- Inference: If the context doesn't have direct statements, you may summarize and infer the answer from the relevant information.
- Time Reference Calculation: If there is a question about time references (like "last year", "two months ago", etc.), calculate the actual date based on the memory timestamp.
  Example: If a memory from 4 May 2022 mentions "went to India last year," then the trip occurred in 2021.
- Specific Dates: Always convert relative time references to specific dates, months, or years. For example, convert "last year" to "2022" or "two months ago" to "March, 2023" based on the memory timestamp.
- Reasonable Justification: If you are uncertain or lack sufficient information, do not state that the information is insufficient. Instead, provide a reasonable and well-justified answer based on general knowledge.
- Keep it brief: Keep your answer brief and to the point.

CONTEXT:
{context}

QUESTION:
{question}

ANSWER:)";

inline constexpr std::string_view kQueryRefinementText = R"(You are an assistant whose role is to generate a refined search query to find missing information.

ORIGINAL QUESTION:
{original_question}

SUB-GOALS STATUS:
Satisfied sub-goals:
{satisfied_text}
Unsatisfied sub-goals:
{unsatisfied_text}

INFORMATION COLLECTED SO FAR:
{context_so_far}

TASK:
Generate a NEW search query that specifically targets the UNSATISFIED sub-goals.

Your new query should:
- 1. Focus on the specific unsatisfied sub-goals.
- 2. Be clear and specific.
- 3. Use different keywords or phrases than the original question.
- 4. Target information that would help satisfy the remaining sub-goals.
- 5. NOT repeat the original question.

RESPONSE FORMAT:
New Query: [Your refined search query - single clear question or search phrase targeting unsatisfied sub-goals]
Target Sub-goals: [List which sub-goal numbers this query aims to satisfy]

Generate your response:)";

inline constexpr std::string_view kNodeSelectionText = R"(You are selecting the most promising memory nodes to explore for answering a question.

QUESTION: {question}
{subgoals_text}

CANDIDATE NODES (retrieved by semantic similarity):
{nodes_text}

INSTRUCTIONS:
Select the nodes that are HIGHLY LIKELY to contain information relevant to one or more sub-goals.
- Be selective: Only choose nodes whose summaries clearly indicate relevance to specific sub-goals.
- Maximum 5 nodes: Select at most 5 nodes to explore.
- Diversity: Try to select nodes that address different sub-goals if possible.
- Quality over quantity: It's better to select 2 highly relevant nodes than 5 marginally relevant ones.
- If a node's summary is vague or doesn't clearly relate to any sub-goal, DON'T select it.
- Consider both the summary content and the similarity score.

RESPONSE FORMAT:
Selected Nodes: [NODE_ID1, NODE_ID2, ...]
Reasoning: [Brief explanation of why each selected node is likely relevant to specific sub-goals]

Now make your selection:)";

inline constexpr std::string_view kClusterSelectionText = R"(You are selecting the most relevant memory node(s) to answer a question.

QUESTION: {question}

AVAILABLE NODES:
{nodes_text}

INSTRUCTIONS:
Select the node(s) that are HIGHLY relevant to answering the question.
- Be selective: Only choose nodes that are HIGHLY relevant to the question.
- Maximum 3 nodes: Select at most 3 nodes per cluster.
- If ONLY ONE node is clearly the most relevant, select just that one.
- Select multiple nodes (2-3) ONLY when they are ALL highly relevant AND provide complementary information:
  * Information is distributed across multiple memories about the SAME topic.
  * The question has multiple specific aspects that DIFFERENT nodes address.
  * Multiple nodes provide different pieces of the SAME answer.
- Consider the summary content, people involved, and time information.
- Do NOT select nodes that are only tangentially related or vaguely relevant.

RESPONSE FORMAT:
Selected Nodes: [NODE_ID1, NODE_ID2, ...]
Reason: [Brief explanation of why these specific nodes are HIGHLY relevant])";

inline constexpr std::string_view kPlanningText = R"(You are a strategic planning assistant. Your task is to analyze a question and break it down into 2-5 specific sub-goals that need to be satisfied to fully answer the question.

QUESTION: {question}

INSTRUCTIONS:
- 1. Analyze what information components are needed to fully answer this question.
- 2. Break down the question into 2-5 specific, concrete sub-goals.
- 3. Each sub-goal should represent a distinct piece of information needed.
- 4. Sub-goals should be:
  - Specific and clear (not vague)
  - Independently verifiable (can determine if it's satisfied)
  - Collectively sufficient (together they fully answer the question)
  - Atomic (each sub-goal addresses ONE aspect)

RESPONSE FORMAT (follow strictly):
Sub-goal 1: [First specific information need]
Sub-goal 2: [Second specific information need]
Sub-goal 3: [Third specific information need]
...

Now analyze the question and generate sub-goals:)";

struct Entry {
  std::string_view id;
  std::string_view text;
};

inline constexpr std::array<Entry, 9> kTemplates{{
    {kEventExtraction, kEventExtractionText},
    {kRelationExtraction, kRelationExtractionText},
    {kCoreference, kCoreferenceText},
    {kActionDecision, kActionDecisionText},
    {kResponseGeneration, kResponseGenerationText},
    {kQueryRefinement, kQueryRefinementText},
    {kNodeSelection, kNodeSelectionText},
    {kClusterSelection, kClusterSelectionText},
    {kPlanning, kPlanningText},
}};

}  // namespace tmpl

enum class EmptyBindingPolicy { placeholder, error };

inline constexpr std::string_view kEmptyMarker = "(none)";

inline std::string_view template_text(std::string_view template_id) {
  for (const auto& e : tmpl::kTemplates)
    if (e.id == template_id) return e.text;
  throw Error(ErrorCode::unknown_template, "no template named '" + std::string(template_id) + "'");
}

namespace detail {

inline bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

/// Calls `on_text(literal)` and `on_var(name)` in order over a template.
template <typename OnText, typename OnVar>
void scan_template(std::string_view t, OnText on_text, OnVar on_var) {
  std::size_t i = 0;
  while (i < t.size()) {
    const char c = t[i];
    if ((c == '{' || c == '}') && i + 1 < t.size() && t[i + 1] == c) {
      on_text(std::string_view(&t[i], 1));
      i += 2;
      continue;
    }
    if (c == '{' && i + 1 < t.size() && is_ident_start(t[i + 1])) {
      std::size_t j = i + 1;
      while (j < t.size() && is_ident_char(t[j])) ++j;
      if (j < t.size() && t[j] == '}') {
        on_var(t.substr(i + 1, j - i - 1));
        i = j + 1;
        continue;
      }
    }
    on_text(t.substr(i, 1));
    ++i;
  }
}

}  // namespace detail

/// Placeholder names of a template, in order of first appearance.
inline std::vector<std::string> template_placeholders(std::string_view template_id) {
  std::vector<std::string> out;
  std::set<std::string, std::less<>> seen;
  detail::scan_template(
      template_text(template_id), [](std::string_view) {},
      [&](std::string_view name) {
        if (seen.insert(std::string(name)).second) out.emplace_back(name);
      });
  return out;
}

/// Substitutes every placeholder. A missing binding is an error; an empty
/// binding renders as "(none)" or is an error, depending on `policy`.
inline std::string render_prompt(std::string_view template_id, const Bindings& bindings,
                                 EmptyBindingPolicy policy = EmptyBindingPolicy::placeholder) {
  const auto text = template_text(template_id);
  std::string out;
  out.reserve(text.size() + 512);
  detail::scan_template(
      text, [&](std::string_view lit) { out.append(lit); },
      [&](std::string_view name) {
        auto it = bindings.find(std::string(name));
        if (it == bindings.end()) {
          throw Error(ErrorCode::unbound_placeholder,
                      "template " + std::string(template_id) + " needs a value for {" + std::string(name) + "}");
        }
        if (it->second.empty()) {
          if (policy == EmptyBindingPolicy::error) {
            throw Error(ErrorCode::unbound_placeholder,
                        "template " + std::string(template_id) + " got an empty value for {" + std::string(name) + "}");
          }
          out.append(kEmptyMarker);
        } else {
          out.append(it->second);
        }
      });
  return out;
}

inline EmptyBindingPolicy empty_binding_policy(const std::string& config_value) {
  return config_value == "error" ? EmptyBindingPolicy::error : EmptyBindingPolicy::placeholder;
}

}  // namespace evmem
