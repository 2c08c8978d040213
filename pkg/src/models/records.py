"""Data models for per-round and final metrics."""

from typing import List, Optional

from pydantic import BaseModel, Field


class ClientRoundMetrics(BaseModel):
    """One participant's measurements in one round."""
    client_id: int = Field(description="Client index")
    pre_update_acc: Optional[float] = Field(
        default=None, description="Accuracy of the stored historical model before the broadcast overwrite"
    )
    post_update_acc: Optional[float] = Field(
        default=None, description="Accuracy right after the local model was overwritten by the global model"
    )
    post_train_acc: Optional[float] = Field(default=None, description="Accuracy after local training")
    train_loss: float = Field(description="Mean training loss over the last local epoch")
    lambda_t: float = Field(description="Distillation weight used this round")


class RoundAggregates(BaseModel):
    """Round-level summaries over participants."""
    mean_acc: Optional[float] = Field(default=None, description="Mean post-training accuracy of participants")
    std_acc: Optional[float] = Field(default=None, description="Population std of participant accuracies")
    mean_forgetting: Optional[float] = Field(
        default=None, description="Mean (pre_update_acc - post_update_acc) over participants with a stored model"
    )
    global_mean_acc: Optional[float] = Field(
        default=None, description="Accuracy of the newly aggregated global model, averaged over all clients"
    )


class RoundRecord(BaseModel):
    """Everything measured in one communication round."""
    round: int = Field(description="1-based round number")
    clients: List[ClientRoundMetrics] = Field(default_factory=list, description="Participants in id order")
    aggregates: RoundAggregates = Field(default_factory=RoundAggregates)


class FinalEvaluation(BaseModel):
    """End-of-run accuracy per client under both evaluation views."""
    personalized_accs: List[Optional[float]] = Field(description="Each client's stored model on its test split")
    global_accs: List[Optional[float]] = Field(description="Final global model on each client's test split")
    evaluation: str = Field(description="Which view the headline numbers use: 'personalized' or 'global'")
    mean_acc: Optional[float] = Field(default=None, description="Headline mean accuracy across clients")
    std_acc: Optional[float] = Field(default=None, description="Headline population std across clients")
    personalized_mean_acc: Optional[float] = Field(default=None, description="Mean over clients of the personalized view")
    personalized_std_acc: Optional[float] = Field(default=None, description="Population std of the personalized view")
    global_mean_acc: Optional[float] = Field(default=None, description="Mean over clients of the global view")
    global_std_acc: Optional[float] = Field(default=None, description="Population std of the global view")

    @property
    def client_accs(self) -> List[Optional[float]]:
        return self.personalized_accs if self.evaluation == "personalized" else self.global_accs
