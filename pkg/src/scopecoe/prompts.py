"""Prompt templates used by every model call.

The extraction, discrimination and answer-generation templates are frozen
transcripts (including their few-shot examples and original typos) and are
pinned byte-for-byte by golden-file tests. The remaining templates
(hypernym generalization, misinformation paraphrase, QA wrapper,
consistency judge) are authored here in the same style and golden-filed
the same way.

Placeholders use square brackets, e.g. ``[Question]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    variables: tuple[str, ...]
    expected_output: str  # structured_object | yes_no | phrase | free_text

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        for var in self.variables:
            if f"[{var}]" not in self.body:
                raise ValueError(
                    f"template {self.name!r} declares unused variable {var!r}"
                )


INTENT_KEYWORD_EXTRACTION = PromptTemplate(
    name="intent_keyword_extraction",
    variables=("Question",),
    expected_output="structured_object",
    body="""Please extract both the intent and keywords of the question, using the following criteria:

1) As for intent, please indicate the content intent of the evidence that the question expects, without going into specific details.

2) As for keywords, Please extract the specific details of the question.

The output must be in json format, consistent with the sample.
Here are some examples:

Example1:

Question:750 7th Avenue and 101 Park Avenue, are located in which city?

Output: { "Intent": "City address Information", "Keywords": ["750 7th Avenue", "101 Park Avenue"] }

Example2:

Question: The Oberoi family is part of a hotel company that has a head office in what city?

Output: { "Intent": "City address Information", "Keywords": ["Oberoi family", "head office"] }

Example3:

Question: What nationality was James Henry Miller's wife?

Output: { "Intent": "Nationality of person", "Keywords": ["James Henry Miller", "wife"] }

Example4:

Question: What is the length of the track where the 2013 Liqui Moly Bathurst 12 Hour was staged?

Output: { "Intent": "Length of track", "Keywords": ["2013 Liqui Moly Bathurst 12 Hour"] }

Example5:

Question: In which American football game was Malcolm Smith named Most Valuable player?

Output: { "Intent": "Name of American football game", "Keywords": ["Malcolm Smith", "Most Valuable player"] }

Question: [Question]

Output:
""",
)


RELATION_EXTRACTION = PromptTemplate(
    name="relation_extraction",
    variables=("Question", "Keywords"),
    expected_output="structured_object",
    body="""Please extract relations based on the input questions and keywords, using the following criteria:

1) Each relation has two elements, the implied keywords and the textual description of the relation.

2) The description of the relation is limited to the two keywords and does not involve other keywords.

3) If there is no relation between keywords, no extraction is required.

The output must be in json format, consistent with the examples.
Here are some examples:

Example1:

Question:750 7th Avenue and 101 Park Avenue, are located in which city?

Keywords:["750 7th Avenue", "101 Park Avenue"]

Output: []

Example2:

Question: Lee Jun-fan played what character in "The Green Hornet" television series?

Keywords:["Lee Jun-fan", "The Green Hornet"]

Output: [{"Keywords":["Lee Jun-fan", "The Green Hornet"], "Description": "Lee Jun-fan played character in The Green Hornet."}]

Example3:

Question: In which stadium do the teams owned by Myra Kraft's husband play?

Keywords: ["teams", "Myra Kraft's husband"]

Output: [{"Keywords":["teams", "Myra Kraft's husband"], "Description": "Teams is owned by Myra Kraft's husband."}]

Example4:

Question: The Colts' first ever draft pick was a halfback who won the Heisman Trophy in what year?

Keywords:["Colts' first ever draft pick", "halfback", "Heisman Trophy"]

Output:[{"Keywords":["Colts' first ever draft pick", "halfback"], "Description": "The Colts' first ever draft pick was a halfback."}]

Example5:

Question: The Golden Globe Award winner for best actor from "Roseanne" starred along what actress in Gigantic?

Keywords:["Golden Globe Award winner", "best actor", "Roseanne", "Gigantic"]

Output: [{"Keywords":["Golden Globe Award winner", "best actor"], "Description": "Golden Globe Award for best actor"}, {"Keywords":["best actor", "Roseanne"], "Description": "The best actor starred in Roseanne."}]

Question: [Question]

Keywords: [Keywords]

Output:
""",
)


INTENT_DISCRIMINATION = PromptTemplate(
    name="intent_discrimination",
    variables=("Intent", "External Knowledge"),
    expected_output="yes_no",
    body="""Please determine whether the input intent is covered in the input external knowledge. Please output only "yes" or "no".

Input intent: [Intent]

Input external knowledge: [External Knowledge]
""",
)


KEYWORD_DISCRIMINATION = PromptTemplate(
    name="keyword_discrimination",
    variables=("Keyword", "External Knowledge"),
    expected_output="yes_no",
    body="""Please determine if the input keyword is mentioned in the input external knowledge. It doesn't necessarily need to be an exact character match; partial matches or semantic similarities are also acceptable. Please output only "yes" or "no".

Input Keyword: [Keyword]

Input external knowledge: [External Knowledge]
""",
)


RELATION_DISCRIMINATION = PromptTemplate(
    name="relation_discrimination",
    variables=("Relation", "External Knowledge"),
    expected_output="yes_no",
    body="""Please infer whether the input external knowledge can infer the input relation description. If there is definite evidence in the input sentence to prove that the input relation description is true, then output "yes", otherwise output "no". Please output only "yes" or "no".

Input relation description: [Relation]

Input external knowledge: [External Knowledge]
""",
)


ANSWER_GENERATION = PromptTemplate(
    name="answer_generation",
    variables=("Correct Answer",),
    expected_output="phrase",
    body="""For the input phrase, please generate a phrase of similar type and format, but not the same. Just output the phrase, no explanation is needed, the expression form is consistent with the examples. Here are some examples:

Example1:

Input phrase: United States

Output: Canada

Example2:

Input phrase: alcohol

Output: Soda

Example3:

Input phrase: September 29, 1784

Output: April 22, 1964

Example4:

Input phrase: Laura Ellen Kirk

Output: Elon Musk

Example5:

Input phrase: 39,134

Output: 19,203

Input phrase: [Correct Answer]

Output:
""",
)


# Artifact-authored templates below: the operations exist upstream but no
# transcript is available for them, so these are written in the same style.

HYPERNYM_GENERALIZATION = PromptTemplate(
    name="hypernym_generalization",
    variables=("Keyword",),
    expected_output="phrase",
    body="""For the input phrase, please generate a higher-level expression: a more generalized term representing the broader category the phrase belongs to. Just output the phrase, no explanation is needed. Here are some examples:

Example1:

Input phrase: hotel company

Output: business organization

Example2:

Input phrase: September 29, 1784

Output: a date in history

Example3:

Input phrase: James Henry Miller

Output: a person

Input phrase: [Keyword]

Output:
""",
)


MISINFORMATION_GENERATION = PromptTemplate(
    name="misinformation_generation",
    variables=("Question", "Incorrect Answer", "Count"),
    expected_output="structured_object",
    body="""For the input question, please generate [Count] different short statements, each asserting that the answer to the question is the input incorrect answer. Every statement must contain the incorrect answer verbatim. The output must be a json list of strings, with no explanation.

Question: [Question]

Incorrect answer: [Incorrect Answer]

Output:
""",
)


QA_ANSWER = PromptTemplate(
    name="qa_answer",
    variables=("External Knowledge", "Question"),
    expected_output="free_text",
    body="""Please answer the question based on the external knowledge below. Answer with a short phrase and no explanation.

External knowledge:
[External Knowledge]

Question: [Question]

Answer:
""",
)


CONSISTENCY_JUDGE = PromptTemplate(
    name="consistency_judge",
    variables=("Question", "Reference Answer", "Model Output"),
    expected_output="yes_no",
    body="""Please determine whether the model output is consistent with the reference answer to the question. Partial wording differences are acceptable as long as the output conveys the same answer. Please output only "yes" or "no".

Question: [Question]

Reference answer: [Reference Answer]

Model output: [Model Output]
""",
)


ALL_TEMPLATES: dict[str, PromptTemplate] = {
    t.name: t
    for t in (
        INTENT_KEYWORD_EXTRACTION,
        RELATION_EXTRACTION,
        INTENT_DISCRIMINATION,
        KEYWORD_DISCRIMINATION,
        RELATION_DISCRIMINATION,
        ANSWER_GENERATION,
        HYPERNYM_GENERALIZATION,
        MISINFORMATION_GENERATION,
        QA_ANSWER,
        CONSISTENCY_JUDGE,
    )
}
